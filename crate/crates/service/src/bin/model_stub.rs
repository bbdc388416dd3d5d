use clap::{Parser, ValueEnum};
use slicewise_service::loopback::{router, Rule};

#[derive(Clone, Copy, ValueEnum)]
enum RuleArg {
    Identity,
    Reference,
}

/// Stand-in model server for the propagation and 2D segmentation endpoints.
#[derive(Parser)]
struct Args {
    #[arg(long, default_value_t = 8090)]
    port: u16,
    #[arg(long, value_enum, default_value_t = RuleArg::Reference)]
    rule: RuleArg,
}

#[tokio::main]
async fn main() -> std::io::Result<()> {
    let args = Args::parse();
    let rule = match args.rule {
        RuleArg::Identity => Rule::Identity,
        RuleArg::Reference => Rule::Reference,
    };
    let listener = tokio::net::TcpListener::bind(("127.0.0.1", args.port)).await?;
    eprintln!("model stub on http://{}", listener.local_addr()?);
    axum::serve(listener, router(rule, None)).await
}
