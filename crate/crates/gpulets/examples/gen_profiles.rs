//! Generates the default synthetic five-model profile set, prints each
//! model's capacity curve and knee, and writes the profile CSV.
//!
//! Run with: cargo run --example gen_profiles

use gpulets::experiments::{default_archetypes, gen_synthetic_profiles, slo_from_profile};

fn main() -> gpulets::Result<()> {
    let archetypes = default_archetypes();
    let profiles = gen_synthetic_profiles(&archetypes)?;

    println!(
        "{:<6} {:>8} {:>10} {:>7}  capacity (req/s) per partition",
        "model", "slo_ms", "L(32,100)", "knee"
    );
    for profile in profiles.iter() {
        let slo = slo_from_profile(profile);
        let curve = profile.capacity_curve(slo);
        let rates: Vec<String> = curve
            .partitions
            .iter()
            .zip(&curve.rates)
            .map(|(p, r)| format!("{p}%:{r:.0}"))
            .collect();
        println!(
            "{:<6} {:>8.1} {:>10.2} {:>6}%  {}",
            profile.name(),
            slo,
            profile.lookup_latency(profile.max_batch(), 100)?,
            curve.max_efficient_partition(),
            rates.join(" ")
        );
    }

    let path = std::env::temp_dir().join("gpulets_profiles.csv");
    profiles.write_path(&path)?;
    println!("\nwrote {}", path.display());
    Ok(())
}
