// Kaplan-Markov P-values for a few taint sequences.

use std::error::Error;

use marrop_audit::{km_pvalue, KaplanMarkov};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let pattern = |n: usize| {
        let mut t = vec![0.04; 5];
        t.resize(n, 0.0);
        t
    };
    println!("U=22.718, five 0.04 then 31 zeros: P = {:.5}", km_pvalue(&pattern(36), 22.718)?);
    println!("U=21,     five 0.04 then 31 zeros: P = {:.5}", km_pvalue(&pattern(36), 21.0)?);
    println!("U=21,     five 0.04 then 28 zeros: P = {:.5}", km_pvalue(&pattern(33), 21.0)?);

    // running P for a clean audit, with a single full taint partway through
    let mut km = KaplanMarkov::new(22.718)?;
    for j in 1..=40 {
        let t = if j == 10 { 1.0 } else { 0.0 };
        let p = km.push(t)?;
        if j % 10 == 0 || j == 9 {
            println!("after {j:2} draws: P = {p:.4}{}", if km.saturated() { " (frozen by a full taint)" } else { "" });
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
