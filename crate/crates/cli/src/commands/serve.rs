use std::io::{stdin, stdout, BufWriter};
use std::net::TcpListener;

use clap::Args;
use storecost::lm_client::{serve_stream, serve_tcp, ServeOptions};
use storecost::Error;

use crate::backend::Backend;
use crate::manifest::Manifest;
use crate::{BackendArgs, Context, Failure};

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("transport").required(true).args(["listen", "stdio"])))]
pub struct ServeArgs {
    /// Accept TCP connections here, e.g. 127.0.0.1:7070 (port 0 picks one).
    #[arg(long, value_name = "ADDR")]
    pub listen: Option<String>,
    /// Answer requests on stdin and write responses to stdout.
    #[arg(long)]
    pub stdio: bool,
    /// Top-k applied when a request does not set one.
    #[arg(long, value_name = "K")]
    pub top_k: Option<usize>,
    /// Longest accepted token sequence.
    #[arg(long, value_name = "N")]
    pub max_length: Option<usize>,
    #[command(flatten)]
    pub backend: BackendArgs,
}

pub fn run(ctx: &Context, args: ServeArgs) -> Result<(), Failure> {
    // The manifest only collects input hashes here; serving writes none.
    let mut scratch = Manifest::new("serve", &ctx.config);
    let backend = Backend::build(&ctx.config.backend_choice()?, &mut scratch)?;
    if matches!(backend, Backend::Server(_)) {
        return Err(
            Error::Usage("serve needs an in-process backend (exact or ngram)".into()).into(),
        );
    }
    let options = ServeOptions {
        default_top_k: args.top_k,
        max_length: args.max_length,
    };
    let io = |what: &'static str| move |e: std::io::Error| Failure::from(Error::io(what, e));
    if args.stdio {
        return serve_stream(
            backend.model(),
            &options,
            stdin().lock(),
            BufWriter::new(stdout().lock()),
        )
        .map_err(io("stdio"));
    }
    let addr = args.listen.as_deref().expect("transport group is required");
    let listener = TcpListener::bind(addr).map_err(io("bind"))?;
    let bound = listener.local_addr().map_err(io("bind"))?;
    eprintln!("listening on {bound}");
    log::info!("serving {} on {bound}", backend.model().identity());
    serve_tcp(backend.model(), &options, listener).map_err(io("accept"))
}
