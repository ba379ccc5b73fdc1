use super::Model;
use crate::error::{ensure_positive, Error, Result};
use crate::gridfn::{Extension, GridFunction};
use crate::semigroup::rk4_step;

/// Below this sup norm a marching solution counts as extinct.
pub const EXTINCTION_THRESHOLD: f64 = 1e-8;

/// March the full model with RK4 until `sup |D (J * beta - beta) + f(., beta)|`
/// drops below `residual_tol`.
///
/// Requires the periodic extension on a grid whose period is an integer
/// multiple of the reaction period. The fixed points of RK4 are exactly the
/// zeros of the right-hand side, so the residual is that of the discrete
/// model itself.
pub fn steady_state(
    model: &Model,
    initial: &GridFunction,
    residual_tol: f64,
    max_time: f64,
) -> Result<GridFunction> {
    ensure_positive("residual_tol", residual_tol)?;
    ensure_positive("max_time", max_time)?;
    model.check(initial)?;
    if model.extension() != Extension::Periodic {
        return Err(Error::Precondition(
            "steady states require the periodic extension".into(),
        ));
    }
    let cells = model.grid().period() / model.reaction().period();
    if (cells - cells.round()).abs() > 1e-9 * cells.max(1.0) || cells.round() < 1.0 {
        return Err(Error::Precondition(format!(
            "grid period {} is not an integer multiple of L = {}",
            model.grid().period(),
            model.reaction().period()
        )));
    }
    if !(initial.max() > 0.0) {
        return Err(Error::Precondition(
            "initial datum must be positive somewhere".into(),
        ));
    }

    // explicit RK4 is stable for dt * |lambda| < 2.7; the spectrum of the
    // linearization lies in [-(2D + k_f), k_f]
    let stiffness = 2.0 * model.dispersal() + model.lipschitz().max(initial.sup_norm() * 2.0);
    let dt = if stiffness > 0.0 {
        (1.0 / stiffness).min(0.1)
    } else {
        0.1
    };
    let rhs = |u: &[f64]| model.rhs(u);

    let mut u = initial.values().to_vec();
    let mut t = 0.0;
    loop {
        let residual = rhs(&u).iter().fold(0.0f64, |m, r| m.max(r.abs()));
        let sup = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if sup < EXTINCTION_THRESHOLD {
            return Err(Error::Extinction { sup });
        }
        if residual < residual_tol {
            log::debug!("steady state reached at t = {t} with residual {residual:e}");
            return model.function(u);
        }
        if !residual.is_finite() {
            return Err(Error::SteadyStateNotConverged {
                time: t,
                residual,
                tolerance: residual_tol,
            });
        }
        if t >= max_time {
            return Err(Error::SteadyStateNotConverged {
                time: t,
                residual,
                tolerance: residual_tol,
            });
        }
        u = rk4_step(&u, dt, &rhs);
        t += dt;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridfn::Grid;
    use crate::kernel::{make_kernel, Profile};
    use crate::reaction::{Cap, Reaction};
    use approx::assert_abs_diff_eq;

    fn periodic_model(reaction: Reaction, cap: f64) -> Model {
        let grid = Grid::periodic(0.0, 16.0, 320).unwrap();
        let kernel = make_kernel(Profile::Gaussian { sigma: 1.0 }, 1e-12, 0.05).unwrap();
        Model::new(
            kernel,
            1.0,
            reaction,
            Cap::Constant(cap),
            grid,
            Extension::Periodic,
        )
        .unwrap()
    }

    #[test]
    fn homogeneous_logistic_converges_to_r() {
        for r in [1.0, 2.0] {
            let m = periodic_model(Reaction::logistic(r).unwrap(), r);
            let init = m.sample(|_| 0.5).unwrap();
            let beta = steady_state(&m, &init, 1e-8, 200.0).unwrap();
            for &v in beta.values() {
                assert_abs_diff_eq!(v, r, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn extinction_is_reported() {
        // negative growth at zero: every solution decays exponentially
        let m = periodic_model(Reaction::logistic(-1.0).unwrap(), 1.0);
        let init = m.sample(|_| 0.5).unwrap();
        assert!(matches!(
            steady_state(&m, &init, 1e-12, 100.0),
            Err(Error::Extinction { .. })
        ));
    }

    #[test]
    fn non_convergence_is_reported() {
        let m = periodic_model(Reaction::logistic(1.0).unwrap(), 1.0);
        let init = m.sample(|_| 0.01).unwrap();
        assert!(matches!(
            steady_state(&m, &init, 1e-12, 1.0),
            Err(Error::SteadyStateNotConverged { .. })
        ));
    }

    #[test]
    fn requires_periodic_layout() {
        let grid = Grid::with_step(-10.0, 10.0, 0.05).unwrap();
        let kernel = make_kernel(Profile::Gaussian { sigma: 1.0 }, 1e-12, 0.05).unwrap();
        let m = Model::new(
            kernel,
            1.0,
            Reaction::logistic(1.0).unwrap(),
            Cap::Constant(1.0),
            grid,
            Extension::Constant,
        )
        .unwrap();
        let init = m.sample(|_| 0.5).unwrap();
        assert!(matches!(
            steady_state(&m, &init, 1e-8, 10.0),
            Err(Error::Precondition(_))
        ));
        let p = periodic_model(Reaction::periodic_kpp(1.0, 0.5, 3.0).unwrap(), 1.5);
        let init = p.sample(|_| 0.5).unwrap();
        assert!(matches!(
            steady_state(&p, &init, 1e-8, 10.0),
            Err(Error::Precondition(_))
        ));
    }
}
