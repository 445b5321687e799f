//! Runs a bundled experiment spec with fewer runs, the same path the
//! `simulate` subcommand takes.

use std::path::Path;

use consensus_ldp::cli::{run_experiment, ExperimentSpec};

fn main() -> consensus_ldp::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/specs");
    for name in ["deterministic_opt.toml", "deterministic_unif.toml"] {
        let mut spec = ExperimentSpec::load(&dir.join(name))?;
        spec.runs = 5000;
        spec.horizon = 100;
        let exp = spec.build(&dir)?;
        let out = run_experiment(&exp, None)?;
        let r = &out.slopes;
        println!("{}: |lambda_2| = {:?}, I~ over the deviation set = {:?}", r.name, r.subdominant_modulus, r.reference.tilde);
        for node in &r.nodes {
            match node.rate {
                Some(rate) => println!("  node {}: rate {rate:.4} on {:?}", node.node, node.window),
                None => println!("  node {}: {}", node.node, node.error.as_deref().unwrap_or("no fit")),
            }
        }
    }
    Ok(())
}
