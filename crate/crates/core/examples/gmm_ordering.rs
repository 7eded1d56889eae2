//! Computes the four curves of the two-class Gaussian mixture example and prints the
//! rate of each on a shared distortion grid.

use std::time::Instant;

use taskrd::curve::linspace;
use taskrd::gmm::{discretize, gmm_ce_curve, gmm_ec_curve, gmm_ird_curve, gmm_ord_curve, GmmSpec};
use taskrd::{BaConfig, LambdaGrid};

fn main() -> taskrd::Result<()> {
    let g = discretize(&GmmSpec::default())?;
    let lambdas = LambdaGrid::log(1e-3, 1e3, 60).values()?;
    let cfg = BaConfig::default();
    let t = Instant::now();
    let ord = gmm_ord_curve(&g, 200)?;
    let ird = gmm_ird_curve(&g, &lambdas, &cfg)?;
    let ec = gmm_ec_curve(&g, &lambdas, &cfg)?;
    println!("ord/ird/ec: {:?}", t.elapsed());
    let t = Instant::now();
    let ce = gmm_ce_curve(&g, &lambdas, &cfg)?;
    println!("ce: {:?}", t.elapsed());
    for p in &ce.points {
        println!(
            "ce lambda {:>10.4} rate {:.5} D_Y {:.5} converged {}",
            p.lambda.unwrap_or(f64::NAN),
            p.rate,
            p.distortion,
            p.converged
        );
    }
    println!("{:>6} {:>9} {:>9} {:>9} {:>9}", "D_Y", "ord", "ird", "ec", "ce");
    let show = |r: Option<f64>| r.map_or("-".to_string(), |v| format!("{v:.5}"));
    for d in linspace(0.17, 0.45, 15) {
        println!(
            "{d:>6.3} {:>9} {:>9} {:>9} {:>9}",
            show(ord.rate_at(d)),
            show(ird.rate_at(d)),
            show(ec.rate_at(d)),
            show(ce.rate_at(d))
        );
    }
    Ok(())
}
