//! Check every hand-written backward pass against central finite differences.

use vsrgan::grad_suite;

fn main() -> vsrgan::Result<()> {
    let which = std::env::args().nth(1).unwrap_or_else(|| "all".into());
    let results = grad_suite::run(&which, None)?;
    print!("{}", grad_suite::format_table(&results));
    let failed = results.iter().filter(|r| !r.passed).count();
    println!("{} rows, {failed} failed", results.len());
    Ok(())
}
