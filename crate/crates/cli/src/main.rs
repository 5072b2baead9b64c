use clap::Parser;
use storecost::ErrorKind;
use storecost_cli::{error_record, exit_code, run, Cli, Failure};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind as ClapKind;
            if matches!(e.kind(), ClapKind::DisplayHelp | ClapKind::DisplayVersion) {
                let _ = e.print();
                std::process::exit(0);
            }
            let _ = e.print();
            let failure = Failure {
                kind: ErrorKind::Usage,
                message: e.kind().to_string(),
            };
            eprintln!("{}", error_record(&failure));
            std::process::exit(exit_code(ErrorKind::Usage));
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    if let Err(f) = run(cli) {
        eprintln!("{}", error_record(&f));
        std::process::exit(f.exit_code());
    }
}
