use std::io::{self, BufReader};
use std::net::{IpAddr, SocketAddr};
use std::process::ExitCode;

use clap::Parser;
use fdexplain_service::cli::{self, Cli, Command};
use fdexplain_service::http;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Command::Serve(args) = &cli.command {
        let ip: IpAddr = match args.host.parse() {
            Ok(ip) => ip,
            Err(e) => {
                eprintln!("invalid host `{}`: {e}", args.host);
                return ExitCode::from(2);
            }
        };
        let runtime = match tokio::runtime::Runtime::new() {
            Ok(rt) => rt,
            Err(e) => {
                eprintln!("cannot start the runtime: {e}");
                return ExitCode::from(2);
            }
        };
        return match runtime.block_on(http::serve(SocketAddr::new(ip, args.port))) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("server error: {e}");
                ExitCode::from(2)
            }
        };
    }
    let stdin = io::stdin();
    let mut input = BufReader::new(stdin.lock());
    let code = cli::run(&cli.command, &mut input, &mut io::stdout().lock(), &mut io::stderr().lock());
    ExitCode::from(code as u8)
}
