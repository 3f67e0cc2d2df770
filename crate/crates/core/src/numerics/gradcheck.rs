//! Central-difference gradient checking.

use crate::numerics::adam::Parameters;

/// Max over all parameters of `|central difference − analytic| / (|analytic| + 1e-8)`.
///
/// `f` is evaluated at `params` with one coordinate perturbed by `±eps`.
pub fn finite_diff_check<P, F>(params: &P, f: F, analytic: &P, eps: f64) -> f64
where
    P: Parameters + Clone,
    F: Fn(&P) -> f64,
{
    let analytic: Vec<f64> = analytic
        .tensors()
        .iter()
        .flat_map(|(_, t)| t.iter().copied())
        .collect();
    let mut probe = params.clone();
    let mut worst = 0.0f64;
    let mut flat = 0;
    let layout: Vec<usize> = params.tensors().iter().map(|(_, t)| t.len()).collect();
    for (ti, &len) in layout.iter().enumerate() {
        for i in 0..len {
            let original = probe.tensors()[ti].1[i];
            probe.tensors_mut()[ti].1[i] = original + eps;
            let plus = f(&probe);
            probe.tensors_mut()[ti].1[i] = original - eps;
            let minus = f(&probe);
            probe.tensors_mut()[ti].1[i] = original;
            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic[flat];
            worst = worst.max((numeric - a).abs() / (a.abs() + 1e-8));
            flat += 1;
        }
    }
    worst
}
