use super::params::ParamStore;
use super::tape::{Tape, Var};
use super::TensorError;

/// Denominator floor for relative errors, so gradients that are both
/// essentially zero compare by absolute difference.
pub const RELATIVE_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct ParamCheck {
    pub name: String,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// Flat index of the element with the largest relative error.
    pub worst_index: usize,
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub tolerance: f64,
    pub params: Vec<ParamCheck>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.params.iter().all(|p| p.max_rel_error < self.tolerance)
    }

    pub fn max_rel_error(&self) -> f64 {
        self.params.iter().fold(0.0, |m, p| m.max(p.max_rel_error))
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

/// Compares reverse-mode gradients of `f` against central differences with
/// step `h`, element by element, for every tensor in `store`.
///
/// `f` must build its loss from `tape.param(store, ..)` leaves and be
/// deterministic.
pub fn grad_check<F>(f: F, store: &ParamStore, h: f64, tol: f64) -> Result<GradCheckReport, TensorError>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<Var, TensorError>,
{
    let mut tape = Tape::new();
    let loss = f(&mut tape, store)?;
    let analytic = tape.backward(loss)?.dense(store);

    let mut work = store.clone();
    let mut eval = |s: &ParamStore| -> Result<f64, TensorError> {
        tape.reset();
        let l = f(&mut tape, s)?;
        Ok(tape.value(l).item())
    };

    let mut params = Vec::with_capacity(store.len());
    let ids: Vec<_> = store.iter().map(|(id, name, _)| (id, name.to_string())).collect();
    for (i, (id, name)) in ids.into_iter().enumerate() {
        let mut check = ParamCheck {
            name,
            max_rel_error: 0.0,
            max_abs_error: 0.0,
            worst_index: 0,
        };
        for j in 0..store.get(id).len() {
            let original = work.get(id).data()[j];
            work.get_mut(id).data_mut()[j] = original + h;
            let plus = eval(&work)?;
            work.get_mut(id).data_mut()[j] = original - h;
            let minus = eval(&work)?;
            work.get_mut(id).data_mut()[j] = original;

            let numeric = (plus - minus) / (2.0 * h);
            let a = analytic[i].data()[j];
            let rel = relative_error(a, numeric);
            check.max_abs_error = check.max_abs_error.max((a - numeric).abs());
            if rel > check.max_rel_error {
                check.max_rel_error = rel;
                check.worst_index = j;
            }
        }
        params.push(check);
    }
    Ok(GradCheckReport {
        tolerance: tol,
        params,
    })
}
