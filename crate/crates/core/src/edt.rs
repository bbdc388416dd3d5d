//! Exact squared Euclidean distance transforms on regular grids.
//!
//! Separable lower-envelope-of-parabolas algorithm (Felzenszwalb and
//! Huttenlocher), one 1D pass per axis, with per-axis voxel spacing so the
//! result is in physical units.

/// Squared distance from every grid point to the nearest seed.
///
/// `dims` lists extents with the fastest-varying axis first, `spacing` the
/// matching physical step. Points with no seed anywhere in the grid get
/// `f64::INFINITY`.
pub fn squared_distance_to_seeds(dims: &[usize], spacing: &[f64], seeds: &[bool]) -> Vec<f64> {
    assert_eq!(dims.len(), spacing.len());
    let total: usize = dims.iter().product();
    assert_eq!(seeds.len(), total);

    let mut field: Vec<f64> = seeds
        .iter()
        .map(|&s| if s { 0.0 } else { f64::INFINITY })
        .collect();

    let mut line = Vec::new();
    let mut out = Vec::new();
    let mut stride = 1;
    for (axis, &n) in dims.iter().enumerate() {
        let step = spacing[axis];
        let outer = total / (n * stride);
        line.resize(n, 0.0);
        out.resize(n, 0.0);
        for o in 0..outer {
            for inner in 0..stride {
                let base = o * n * stride + inner;
                for (k, slot) in line.iter_mut().enumerate() {
                    *slot = field[base + k * stride];
                }
                envelope_1d(&line, step, &mut out);
                for (k, v) in out.iter().enumerate() {
                    field[base + k * stride] = *v;
                }
            }
        }
        stride *= n;
    }
    field
}

/// One-dimensional pass: `out[q] = min_p (step*(q-p))^2 + f[p]`.
fn envelope_1d(f: &[f64], step: f64, out: &mut [f64]) {
    let w2 = step * step;
    // Sites with finite cost; infinite sites never win.
    let mut sites: Vec<usize> = Vec::with_capacity(f.len());
    let mut bounds: Vec<f64> = Vec::with_capacity(f.len());

    let intersect = |a: usize, b: usize| -> f64 {
        let (fa, fb) = (f[a], f[b]);
        let (qa, qb) = (a as f64, b as f64);
        ((fb + w2 * qb * qb) - (fa + w2 * qa * qa)) / (2.0 * w2 * (qb - qa))
    };

    for q in 0..f.len() {
        if !f[q].is_finite() {
            continue;
        }
        loop {
            match sites.last() {
                None => {
                    sites.push(q);
                    bounds.push(f64::NEG_INFINITY);
                    break;
                }
                Some(&v) => {
                    let s = intersect(v, q);
                    if s <= *bounds.last().unwrap() {
                        sites.pop();
                        bounds.pop();
                    } else {
                        sites.push(q);
                        bounds.push(s);
                        break;
                    }
                }
            }
        }
    }

    if sites.is_empty() {
        out.iter_mut().for_each(|v| *v = f64::INFINITY);
        return;
    }

    let mut k = 0;
    for (q, slot) in out.iter_mut().enumerate() {
        let qf = q as f64;
        while k + 1 < sites.len() && bounds[k + 1] < qf {
            k += 1;
        }
        let v = sites[k];
        let d = step * (q as f64 - v as f64);
        *slot = d * d + f[v];
    }
}
