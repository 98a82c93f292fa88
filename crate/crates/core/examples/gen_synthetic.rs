//! Writes the bundled synthetic market to the directory given as the first
//! argument (default `data/synthetic`).

use portopt::synthetic::{generate, write_market, SyntheticSpec};

fn main() -> std::io::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "data/synthetic".to_string());
    let spec = SyntheticSpec::default();
    write_market(&dir, &generate(&spec))?;
    println!(
        "{} assets x {} days (seed {}) written to {dir}",
        spec.n_assets, spec.n_days, spec.seed
    );
    Ok(())
}
