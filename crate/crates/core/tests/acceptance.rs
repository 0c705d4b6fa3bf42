//! Full-tier acceptance run: one line per criterion, then the detailed
//! table. Exits nonzero if any criterion fails.

use ordwalk::verify::{run_with_progress, Tier, VerifyOptions};
use std::process::ExitCode;
use std::time::Instant;

fn main() -> ExitCode {
    let seed = std::env::var("ORDWALK_SEED").ok().and_then(|s| s.parse().ok()).unwrap_or(7);
    let opts = VerifyOptions { tier: Tier::Full, seed, ..Default::default() };
    let start = Instant::now();
    let report = run_with_progress(&opts, &mut |o| {
        println!("criterion {:>2} {:<18} {}", o.index, o.name, if o.passed() { "PASS" } else { "FAIL" });
    });
    let report = match report {
        Ok(r) => r,
        Err(e) => {
            println!("acceptance suite could not run: {e}");
            return ExitCode::FAILURE;
        }
    };
    println!();
    print!("{}", report.render());
    println!("elapsed {:.1}s", start.elapsed().as_secs_f64());
    if report.all_passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
