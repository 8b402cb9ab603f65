use slicesim_harness::acceptance::run_acceptance;
use slicesim_harness::cli::{parse_args, Command, USAGE};
use slicesim_harness::runner::run_sweep;

const EXIT_USAGE: i32 = 1;
const EXIT_RUNTIME: i32 = 2;
const EXIT_CHECK_FAILED: i32 = 3;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let command = match parse_args(&args) {
        Ok(cmd) => cmd,
        Err(err) => {
            if !err.0.is_empty() {
                eprintln!("error: {err}\n");
            }
            eprint!("{USAGE}");
            std::process::exit(if err.0.is_empty() { 0 } else { EXIT_USAGE });
        }
    };

    match command {
        Command::Run(spec) => {
            if let Err(err) = run_sweep(&spec) {
                eprintln!("error: {err}");
                std::process::exit(EXIT_RUNTIME);
            }
        }
        Command::Check { jobs } => {
            eprintln!(
                "running acceptance checks; the experiment batch simulates \
                 {} runs of 600 s and takes a while",
                3 * slicesim_harness::acceptance::SEEDS.len() + 1
            );
            let results = run_acceptance(jobs, |r| {
                println!("{}", r.line());
                let _ = std::io::Write::flush(&mut std::io::stdout());
            });
            if results.iter().any(|r| !r.passed) {
                std::process::exit(EXIT_CHECK_FAILED);
            }
        }
    }
}
