//! Rate functions of single observation models, the weighted rate `I~` of a
//! network, and the rate over the complement of an accuracy ball.

use consensus_ldp::observation::{DiscreteModel, GaussianModel, ObservationModel};
use consensus_ldp::rates::{isolation_fusion_rates, rate_over_ball_complement, RateFunction};
use nalgebra::{dvector, DVector};

fn main() -> consensus_ldp::Result<()> {
    let coin = ObservationModel::Discrete(DiscreteModel::new(vec![dvector![1.0, 0.0], dvector![0.0, 1.0]], vec![0.3, 0.7])?);
    let x = dvector![0.5, 0.5];
    println!("coin: Lambda(0) = {}, I(x) closed = {:?}, numeric = {:?}", coin.lmgf(&dvector![0.0, 0.0])?, coin.conjugate_closed_form(&x)?, coin.conjugate(&x)?);

    // Four identical nodes: I <= I~ <= N I for any weights.
    let n = 4;
    let a = dvector![0.4, 0.3, 0.2, 0.1];
    let (iso, fus) = isolation_fusion_rates(&coin, n, &x)?;
    let tilde = RateFunction::tilde(&vec![coin.clone(); n], &a)?.eval(&x)?;
    println!("coin at {:?}: I = {iso:?}, I~ = {tilde:?}, N I = {fus:?}", x.as_slice());

    // Heterogeneous scalar Gaussians.
    let variances = [1.0, 4.0, 0.5];
    let models: Vec<ObservationModel> =
        variances.iter().map(|&v| GaussianModel::scalar(0.0, v).map(ObservationModel::Gaussian)).collect::<Result<_, _>>()?;
    let uniform = DVector::from_element(3, 1.0 / 3.0);
    let skewed = dvector![0.3, 0.075, 0.625];
    for (label, w) in [("uniform", &uniform), ("skewed", &skewed)] {
        let rate = RateFunction::tilde(&models, w)?;
        println!(
            "{label}: I~(1) = {:?}, rate over |x| >= 0.2: {:?}",
            rate.eval(&dvector![1.0])?,
            rate_over_ball_complement(&models, w, 0.2)?
        );
    }
    Ok(())
}
