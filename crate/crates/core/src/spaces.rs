//! Weighted nonlocal Sobolev norms on discrete fields.
//!
//! `‖u‖²_V = [u]²_{D×D} + ∫_D rho u²` is the energy norm of the assembled
//! form. Fractional and negative-order scales are realized through powers of
//! the discrete eigenvalues, `‖u‖²_(s) = Σ λ_k^{2s/α} û_k²`.

use crate::error::{Error, Result};
use crate::galerkin::EigenBasis;
use crate::kernel::{Field, FractionalOrder, NonlocalForm};
use crate::quadrature::GaussRule;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormReport {
    /// `‖u‖_H`
    pub l2: f64,
    /// `[u]_{W^{α/2,2}(D)}` from direct quadrature of the double integral.
    pub gagliardo: f64,
    /// `(∫ rho u²)^{1/2}`
    pub weighted_l2: f64,
    /// `(uᵀAu)^{1/2}`
    pub v_norm: f64,
}

impl NormReport {
    /// `|v² − g² − w²| / v²`.
    pub fn split_defect(&self) -> f64 {
        let v2 = self.v_norm * self.v_norm;
        if v2 == 0.0 {
            return 0.0;
        }
        (v2 - self.gagliardo.powi(2) - self.weighted_l2.powi(2)).abs() / v2
    }
}

pub fn norms(u: &Field, form: &NonlocalForm) -> Result<NormReport> {
    let l2sq = form.l2_product(u, u)?;
    let vsq = form.energy_product(u, u)?;
    let wsq = form.weight().quadratic(u.values(), u.values());
    let gsq = gagliardo_sq(u, form.alpha());
    Ok(NormReport {
        l2: l2sq.max(0.0).sqrt(),
        gagliardo: gsq.max(0.0).sqrt(),
        weighted_l2: wsq.max(0.0).sqrt(),
        v_norm: vsq.max(0.0).sqrt(),
    })
}

/// `∬_{D×D} (u(x)−u(y))² |x−y|^{-1-α} dx dy` by cell-pair quadrature of the
/// field itself, without touching the assembled matrix.
pub fn gagliardo_sq(u: &Field, alpha: FractionalOrder) -> f64 {
    let a = alpha.value();
    let mesh = u.mesh();
    let n = mesh.n_cells();
    let h = mesh.h();
    let far = GaussRule::new(12);
    let radial = GaussRule::new(20);
    let slope = |c: usize| (u.node_value(c + 1) - u.node_value(c)) / h;

    let mut total = 0.0;
    // same cell: (u(x)-u(y))² = s²(x-y)²
    let same = h.powf(3.0 - a) * 2.0 / ((2.0 - a) * (3.0 - a));
    for c in 0..n {
        total += slope(c).powi(2) * same;
    }
    // neighbours: p = x_m - x, q = y - x_m, integrand (s_a p + s_b q)² (p+q)^{-1-α}
    for c in 0..n - 1 {
        let (sa, sb) = (slope(c), slope(c + 1));
        let quad = |w: f64| (sa * w + sb * (1.0 - w)).powi(2);
        let lower = h.powf(3.0 - a) / (3.0 - a) * (sa * sa + sa * sb + sb * sb) / 3.0;
        let upper = radial.integrate(h, 2.0 * h, |r| {
            let (w0, w1) = (1.0 - h / r, h / r);
            r.powf(2.0 - a) * GaussRule::new(3).integrate(w0, w1, quad)
        });
        total += 2.0 * (lower + upper);
    }
    // separated cells
    for ca in 0..n {
        let xa = mesh.node(ca);
        for cb in ca + 2..n {
            let xb = mesh.node(cb);
            let mut s = 0.0;
            for (&ti, &wi) in far.nodes.iter().zip(&far.weights) {
                let x = xa + h * ti;
                let ux = u.node_value(ca) * (1.0 - ti) + u.node_value(ca + 1) * ti;
                for (&tj, &wj) in far.nodes.iter().zip(&far.weights) {
                    let y = xb + h * tj;
                    let uy = u.node_value(cb) * (1.0 - tj) + u.node_value(cb + 1) * tj;
                    s += wi * wj * (ux - uy).powi(2) * (y - x).powf(-1.0 - a);
                }
            }
            total += 2.0 * s * h * h;
        }
    }
    total
}

/// Spectral scale of the discrete operator: `‖u‖²_(s) = Σ λ_k^{2s/α} û_k²`.
#[derive(Debug, Clone, Copy)]
pub struct SpectralScale<'a> {
    basis: &'a EigenBasis,
    alpha: FractionalOrder,
}

impl<'a> SpectralScale<'a> {
    pub fn new(basis: &'a EigenBasis, alpha: FractionalOrder) -> Self {
        SpectralScale { basis, alpha }
    }

    pub fn basis(&self) -> &EigenBasis {
        self.basis
    }

    pub fn alpha(&self) -> FractionalOrder {
        self.alpha
    }

    /// `(Σ λ_k^{2s/α} û_k²)^{1/2}` for any real `s`.
    pub fn norm(&self, coeffs: &[f64], s: f64) -> f64 {
        let p = 2.0 * s / self.alpha.value();
        coeffs
            .iter()
            .zip(self.basis.lambdas())
            .map(|(c, l)| l.powf(p) * c * c)
            .sum::<f64>()
            .sqrt()
    }

    /// Squared negative-order norm with precomputed weights, for hot loops.
    pub fn dual_weights(&self, s: f64) -> Vec<f64> {
        let p = -2.0 * s / self.alpha.value();
        self.basis.lambdas().iter().map(|l| l.powf(p)).collect()
    }
}

/// Negative-order norm `(Σ λ_k^{-2s/α} ŵ_k²)^{1/2}` of modal coefficients `ŵ`.
pub fn dual_norm(w_hat: &[f64], scale: &SpectralScale<'_>, s: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::Parameter(format!("dual order s = {s} must be positive")));
    }
    Ok(scale.norm(w_hat, -s))
}

/// Negative-order norm of a dual vector such as `A u`.
pub fn dual_norm_of_functional(w: &[f64], scale: &SpectralScale<'_>, s: f64) -> Result<f64> {
    let w_hat = scale.basis().dual_coefficients(w)?;
    dual_norm(&w_hat, scale, s)
}

/// `‖A u‖_(−α/2) / ‖u‖_V`; one on the span of the basis.
pub fn operator_dual_bound_check(
    u: &Field,
    form: &NonlocalForm,
    scale: &SpectralScale<'_>,
) -> Result<f64> {
    let v2 = form.energy_product(u, u)?;
    if v2 <= 0.0 {
        return Err(Error::Parameter(
            "operator bound ratio undefined for the zero field".into(),
        ));
    }
    let au = crate::kernel::apply_operator(form, u)?;
    let num = dual_norm_of_functional(&au, scale, form.alpha().value() / 2.0)?;
    Ok(num / v2.sqrt())
}
