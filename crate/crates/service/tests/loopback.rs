use std::time::Duration;

use slicewise_core::plane::{Frame, MaskSlice, Plane};
use slicewise_core::prompt::{
    BoxPrompt, Click, ClickLabel, InteractiveSegmenter, ReferenceSegmenter, RemoteSegmenter,
    SegmenterInput,
};
use slicewise_core::propagation::{
    propagate, Direction, IdentityPropagator, PropagationError, Propagator, Provenance,
    ReferencePropagator, RemotePropagator,
};
use slicewise_core::volume::{make_phantom, to_frames, PhantomSpec};
use slicewise_core::wire::{PROPAGATION_PATH, SEGMENT2D_PATH};
use slicewise_core::{FrameStack, WindowSpec};
use slicewise_service::loopback::{router, Fault, Rule};
use slicewise_service::BackgroundServer;

const TIMEOUT: Duration = Duration::from_secs(10);

fn phantom_stack() -> (FrameStack, MaskSlice, usize) {
    let (v, m) = make_phantom(&PhantomSpec::centered([24, 20, 15], 11)).unwrap();
    let stack = to_frames(&v, 2, WindowSpec::MR_DEFAULT).unwrap();
    (stack, m.slice(2, 6).unwrap(), 6)
}

fn serve(rule: Rule, fault: Option<Fault>) -> BackgroundServer {
    BackgroundServer::start(router(rule, fault), 0).unwrap()
}

fn remote(url: String) -> impl Fn() -> Box<dyn Propagator> + Sync {
    move || Box::new(RemotePropagator::new(&url, TIMEOUT)) as Box<dyn Propagator>
}

#[test]
fn identity_server_matches_identity_propagator() {
    let (stack, prompt, c) = phantom_stack();
    let server = serve(Rule::Identity, None);
    let got = propagate(&stack, &prompt, c, &remote(server.url())).unwrap();
    let want = propagate(&stack, &prompt, c, &|| {
        Box::new(IdentityPropagator::default()) as Box<dyn Propagator>
    })
    .unwrap();
    assert!(got.is_complete());
    assert_eq!(got.mask, want.mask);
    assert_eq!(got.provenance, want.provenance);
}

#[test]
fn reference_server_matches_local_reference() {
    let (stack, prompt, c) = phantom_stack();
    let server = serve(Rule::Reference, None);
    let got = propagate(&stack, &prompt, c, &remote(server.url())).unwrap();
    let want = propagate(&stack, &prompt, c, &|| {
        Box::new(ReferencePropagator::default()) as Box<dyn Propagator>
    })
    .unwrap();
    assert_eq!(got.mask, want.mask);
}

#[test]
fn center_at_either_end() {
    let (stack, prompt, _) = phantom_stack();
    let server = serve(Rule::Identity, None);
    for c in [0, stack.len() - 1] {
        let r = propagate(&stack, &prompt, c, &remote(server.url())).unwrap();
        assert!(r.is_complete());
        assert!(r.provenance.iter().all(|p| *p != Provenance::Missing));
    }
}

/// Every fault stops exactly the affected direction at the affected frame.
#[test]
fn faults_give_partial_results_with_correct_provenance() {
    let (stack, prompt, c) = phantom_stack();
    let n = stack.len();
    for (fault, at) in [
        (Fault::DropAt(10), 10),
        (Fault::WrongShapeAt(9), 9),
        (Fault::WrongIndexAt(12), 12),
        (Fault::EarlyDoneAt(3), 3),
        (Fault::DropAt(0), 0),
    ] {
        let server = serve(Rule::Identity, Some(fault));
        let r = propagate(&stack, &prompt, c, &remote(server.url())).unwrap();
        assert_eq!(r.failures.len(), 1, "{fault:?}");
        let f = &r.failures[0];
        assert_eq!(f.at_index, at, "{fault:?}");
        let forward = at > c;
        assert_eq!(
            f.direction,
            if forward {
                Direction::Forward
            } else {
                Direction::Backward
            }
        );
        match (fault, &f.error) {
            (Fault::DropAt(_), PropagationError::Transport { index, .. }) => assert_eq!(*index, at),
            (Fault::DropAt(_), e) => panic!("drop gave {e:?}"),
            (_, PropagationError::Protocol { index, .. }) => assert_eq!(*index, at),
            (_, e) => panic!("{fault:?} gave {e:?}"),
        }
        for k in 0..n {
            let expected = if k == c {
                Provenance::Prompt
            } else if forward && k >= at || !forward && k <= at {
                Provenance::Missing
            } else if k > c {
                Provenance::Forward
            } else {
                Provenance::Backward
            };
            assert_eq!(r.provenance[k], expected, "{fault:?} slice {k}");
            let s = r.mask.slice(2, k).unwrap();
            if expected == Provenance::Missing {
                assert!(s.is_blank());
            } else {
                assert_eq!(s, prompt);
            }
        }
    }
}

#[test]
fn unreachable_server_fails_both_directions() {
    let (stack, prompt, c) = phantom_stack();
    let port = std::net::TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let r = propagate(
        &stack,
        &prompt,
        c,
        &remote(format!("http://127.0.0.1:{port}")),
    )
    .unwrap();
    assert_eq!(r.failures.len(), 2);
    assert_eq!(
        r.provenance
            .iter()
            .filter(|p| **p == Provenance::Prompt)
            .count(),
        1
    );
    assert_eq!(
        r.provenance
            .iter()
            .filter(|p| **p == Provenance::Missing)
            .count(),
        stack.len() - 1
    );
}

fn frame() -> Frame {
    Plane::from_fn(30, 40, |r, c| {
        if (8..20).contains(&r) && (10..30).contains(&c) {
            200
        } else {
            ((r * 13 + c * 7) % 30) as u8
        }
    })
}

#[test]
fn remote_segmenter_matches_reference_segmenter() {
    let server = serve(Rule::Reference, None);
    let f = frame();
    let clicks = [
        Click {
            row: 12,
            col: 15,
            label: ClickLabel::Foreground,
            round: 1,
        },
        Click {
            row: 14,
            col: 25,
            label: ClickLabel::Background,
            round: 2,
        },
    ];
    let base = MaskSlice::from_fn(30, 40, |r, c| r < 3 && c < 3);
    let inputs = [
        SegmenterInput {
            clicks: &clicks[..1],
            bbox: None,
            mask: None,
        },
        SegmenterInput {
            clicks: &clicks,
            bbox: None,
            mask: None,
        },
        SegmenterInput {
            clicks: &clicks[..1],
            bbox: Some(BoxPrompt::new(5, 5, 25, 20).unwrap()),
            mask: None,
        },
        SegmenterInput {
            clicks: &[],
            bbox: None,
            mask: Some(&base),
        },
        SegmenterInput {
            clicks: &clicks[..1],
            bbox: None,
            mask: Some(&base),
        },
    ];
    let mut remote = RemoteSegmenter::new(&server.url(), TIMEOUT);
    for input in &inputs {
        let want = ReferenceSegmenter::default().predict(&f, input).unwrap();
        assert_eq!(remote.predict(&f, input).unwrap(), want);
    }
}

#[test]
fn malformed_requests_are_rejected() {
    let server = serve(Rule::Identity, None);
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .http_status_as_error(false)
        .build()
        .into();
    let post = |path: &str, body: serde_json::Value| {
        let mut r = agent
            .post(format!("{}{path}", server.url()))
            .send_json(body)
            .unwrap();
        (
            r.status().as_u16(),
            r.body_mut().read_json::<serde_json::Value>().unwrap(),
        )
    };
    let frame = slicewise_core::wire::WireFrame::encode(0, &frame());
    let (s, e) = post(
        PROPAGATION_PATH,
        serde_json::json!({ "frames": [frame], "prompt": { "index": 0, "mask_rle": [5] }, "direction": "forward" }),
    );
    assert_eq!(s, 400);
    assert_eq!(e["field"], "prompt.mask_rle");
    let (s, e) = post(
        PROPAGATION_PATH,
        serde_json::json!({ "frames": [], "direction": "sideways" }),
    );
    assert_eq!(s, 422);
    assert!(e["field"].is_string());
    let (s, e) = post(
        SEGMENT2D_PATH,
        serde_json::json!({ "frame": frame, "clicks": [{ "row": 99, "col": 0, "label": "foreground" }] }),
    );
    assert_eq!(s, 400);
    assert_eq!(e["field"], "clicks");
    let mut r = agent
        .get(format!("{}{PROPAGATION_PATH}/nope/next", server.url()))
        .call()
        .unwrap();
    assert_eq!(r.status().as_u16(), 404);
    assert_eq!(
        r.body_mut().read_json::<serde_json::Value>().unwrap()["code"],
        "not_found"
    );
}
