//! Sample a spiked-Gaussian dataset, solve the hard-margin problem, and
//! compare the Monte-Carlo test error against the closed-form value.

use marginlab::data_gen::{sample_sg, DistributionSpec, SgSpec};
use marginlab::eval::{test_error_exact_sg_gaussian, test_error_mc, Predictor};
use marginlab::geometry::orthogonality_profile;
use marginlab::maxmargin::solve_max_margin;

fn main() -> marginlab::Result<()> {
    let spec = SgSpec::pgaus(4000, 0.75, 0.1)?;
    let data = sample_sg(&spec, 20, 0)?; // deterministic in (spec, n, seed)
    let profile = orthogonality_profile(&data)?;
    let sol = solve_max_margin(&data, 1e-8, 200_000)?;
    let exact = test_error_exact_sg_gaussian(&sol.w, &spec)?;
    let mc = test_error_mc(
        &Predictor::Linear { w: sol.w.clone() },
        &DistributionSpec::Sg(spec),
        100_000,
        0,
        0.99,
    )?;
    println!(
        "p* = {:?}, min margin = {:.4}",
        profile.p_star,
        sol.margins.iter().cloned().fold(f64::INFINITY, f64::min)
    );
    println!(
        "test error: closed form {:.4}, monte carlo {:.4} in [{:.4}, {:.4}]",
        exact.point_estimate, mc.point_estimate, mc.ci_low, mc.ci_high
    );
    Ok(())
}
