//! Asymptotic verification on neck regions: hatted rescalings, frame
//! extraction, comparison of the rescaled curvature quantities against their
//! closed-form limits, the averaged Gauss-map curve with its geodesic
//! defect, and the energy/length identities.
//!
//! The hat construction recenters one segment of a long cylinder,
//!
//! ```text
//! f̂(t,θ) = e^{−c}( f((i−1)L + t, θ) − θ-average of f((i−1)L, ·) ),
//! c = u((i−1)L, 0),   ε̂ = √(W(f̂, [0,L]×S¹)/πL),
//! ```
//!
//! after which Ĥ/ε̂, (𝔫̂−𝔫̄)/ε̂, Â/ε̂, K̂/ε̂² all have explicit limits
//! determined by an orthonormal frame e₁, e₂ and a unit pair (v₁, v₂) of
//! normal vectors.

use rayon::prelude::*;

use crate::exterior::{
    grassmann_tangent_project, nearest_grassmann, wedge, Bivector, Vector,
};
use crate::geometry::{
    sample_geometry, willmore_energy, willmore_energy_total, CylinderDomain, GeometryField,
    Immersion, JetGeometry,
};
use crate::model::{sampler_r3, RotationFamilyR3};
use crate::residue;
use crate::spectral::{project_f, project_g, GridField};
use crate::stencil;
use crate::{Error, Result, SkewMatrix};

/// Centered, rescaled view of one segment of a base immersion.
pub struct HattedSurface<'a> {
    pub base: &'a dyn Immersion,
    /// 1-based segment index i of the base cylinder.
    pub segment: usize,
    pub seg_len: f64,
    /// Coordinate shift (i−1)L.
    pub shift: f64,
    /// e^{−c} with c the conformal factor of the base at ((i−1)L, 0).
    pub scale: f64,
    /// Scaled θ-average of f at the base slice, subtracted at order zero.
    pub offset: Vector,
}

impl<'a> HattedSurface<'a> {
    pub fn new(
        base: &'a dyn Immersion,
        segment: usize,
        seg_len: f64,
        n_th_quad: usize,
    ) -> Result<Self> {
        if segment == 0 || !(seg_len > 0.0) {
            return Err(Error::Domain("need 1-based segment and L > 0".into()));
        }
        if !base.analytic() {
            return Err(Error::Domain(
                "hat construction needs analytic partials".into(),
            ));
        }
        let shift = (segment - 1) as f64 * seg_len;
        let c = JetGeometry::at(base, shift, 0.0)?.u.v;
        let scale = (-c).exp();
        let mut avg = Vector::zeros(base.dim());
        for j in 0..n_th_quad {
            let th = std::f64::consts::TAU * j as f64 / n_th_quad as f64;
            avg.axpy(1.0 / n_th_quad as f64, &base.eval(shift, th));
        }
        Ok(HattedSurface {
            base,
            segment,
            seg_len,
            shift,
            scale,
            offset: avg.scale(scale),
        })
    }
}

impl Immersion for HattedSurface<'_> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn analytic(&self) -> bool {
        true
    }

    fn partial(&self, dt: u32, dh: u32, t: f64, th: f64) -> Option<Vector> {
        let mut out = self
            .base
            .partial(dt, dh, t + self.shift, th)?
            .scale(self.scale);
        if dt == 0 && dh == 0 {
            out = out.sub(&self.offset);
        }
        Some(out)
    }
}

/// Hatted geometry over the window [−L, L]×S¹ with the derived scalars the
/// limit comparisons need.
pub struct NeckContext<'a> {
    pub hs: HattedSurface<'a>,
    pub domain: CylinderDomain,
    pub gf: GeometryField,
    pub eps: f64,
    /// θ-average of 𝔫̂ at t = 0.
    pub n_bar: Bivector,
    /// θ-average of f̂ at t = 0 (the centering defect; ~0 by construction).
    pub centering_defect: f64,
}

/// Sample the hatted geometry of `base` at 1-based segment `segment` over
/// [−L, L]×S¹. `n_t` counts t-intervals over the window (two segments).
pub fn neck_context<'a>(
    base: &'a dyn Immersion,
    segment: usize,
    seg_len: f64,
    m: usize,
    n_t: usize,
    n_th: usize,
) -> Result<NeckContext<'a>> {
    let hs = HattedSurface::new(base, segment, seg_len, n_th)?;
    let domain = CylinderDomain::new(-seg_len, seg_len, seg_len, m, n_t, n_th)?;
    let gf = sample_geometry(&hs, &domain)?;
    let w1 = willmore_energy(&gf, 1)?;
    if !(w1 > 1e-28) {
        return Err(Error::Degenerate(
            "vanishing neck energy: epsilon-hat is zero".into(),
        ));
    }
    let eps = (w1 / (std::f64::consts::PI * seg_len)).sqrt();
    let it0 = domain.t_index(0.0)?;
    let n = gf.n;
    let mut n_bar = Bivector::zeros(n);
    let mut f_bar = Vector::zeros(n);
    for j in 0..n_th {
        n_bar.axpy(1.0 / n_th as f64, &gf.node(it0, j).nrm);
        f_bar.axpy(1.0 / n_th as f64, &gf.node(it0, j).f);
    }
    // The context is sampled on the hatted immersion whose centering slice
    // is t = 0, so the average must vanish up to quadrature roundoff.
    let centering_defect = f_bar.norm();
    Ok(NeckContext {
        hs,
        domain,
        gf,
        eps,
        n_bar,
        centering_defect,
    })
}

/// The frame of the first-order limits: orthonormal tangent plane (e₁, e₂)
/// at the center and the unit normal coefficient pair (v₁, v₂).
#[derive(Debug, Clone)]
pub struct NeckFrame {
    pub e1: Vector,
    pub e2: Vector,
    pub v1: Vector,
    pub v2: Vector,
    /// |(v₁,v₂)| before normalization; ≈ 1 when the limit theory applies.
    pub rescale: f64,
    pub orthonormality_defect: f64,
}

const MODE_FLOOR: f64 = 1e-6;

/// Extract the limit frame: e₁ = −e^{−û}f̂_t(0,0), e₂ = e^{−û}f̂_θ(0,0), and
/// (v₁, v₂) from the growing m-mode of Ĥ/ε̂ over [0, L], projected off the
/// tangent plane and normalized to |v₁|² + |v₂|² = 1.
pub fn extract_frame(ctx: &NeckContext) -> Result<NeckFrame> {
    let gf = &ctx.gf;
    let it0 = ctx.domain.t_index(0.0)?;
    let node0 = gf.node(it0, 0);
    let lam = (-node0.u).exp();
    let e1 = node0.ft.scale(-lam);
    let e2 = node0.fh.scale(lam);
    let orthonormality_defect = (e1.dot(&e1) - 1.0)
        .abs()
        .max((e2.dot(&e2) - 1.0).abs())
        .max(e1.dot(&e2).abs());

    let m = ctx.domain.m as f64;
    let mut h = GridField::mean_curvature(gf);
    for x in &mut h.data {
        *x /= ctx.eps;
    }
    let mode = project_f(&h, 1)?;
    let damp = (-m * mode.mid).exp();
    let mut v1 = mode.a.scale(damp);
    let mut v2 = mode.b.scale(damp);
    for v in [&mut v1, &mut v2] {
        let c1 = v.dot(&e1);
        let c2 = v.dot(&e2);
        v.axpy(-c1, &e1);
        v.axpy(-c2, &e2);
    }
    let rescale = (v1.dot(&v1) + v2.dot(&v2)).sqrt();
    if rescale < MODE_FLOOR {
        return Err(Error::Degenerate(
            "m-mode energy below floor: limit frame undefined".into(),
        ));
    }
    Ok(NeckFrame {
        e1,
        e2,
        v1: v1.scale(1.0 / rescale),
        v2: v2.scale(1.0 / rescale),
        rescale,
        orthonormality_defect,
    })
}

/// Sup-norm distances of the rescaled first-order quantities from their
/// closed-form limits over the window, plus the scalar speed check.
#[derive(Debug, Clone, serde::Serialize)]
pub struct FirstOrderResiduals {
    pub h: f64,
    pub gauss: f64,
    pub a_tt: f64,
    pub a_tth: f64,
    pub a_thth: f64,
    pub gauss_curvature: f64,
    pub normal_curvature: f64,
    /// |(1/2π)∫∂_t𝔫̂ dθ|/ε̂ at t = 0; the limit value is 1/2.
    pub scalar_speed: f64,
}

impl FirstOrderResiduals {
    pub fn max_field_residual(&self) -> f64 {
        [
            self.h,
            self.gauss,
            self.a_tt,
            self.a_tth,
            self.a_thth,
            self.gauss_curvature,
            self.normal_curvature,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

pub fn first_order_residuals(ctx: &NeckContext, frame: &NeckFrame) -> Result<FirstOrderResiduals> {
    let gf = &ctx.gf;
    let d = &ctx.domain;
    let m = d.m as f64;
    let eps = ctx.eps;
    let (v1, v2, e1, e2) = (&frame.v1, &frame.v2, &frame.e1, &frame.e2);
    // Constant bivectors of the Gauss-map limit.
    let b_lin = wedge(e1, v2)?.sub(&wedge(e2, v1)?).scale(0.5);
    let b_cos = wedge(v1, e2)?.add(&wedge(v2, e1)?).scale(1.0 / (4.0 * m));
    let b_sin = wedge(v1, e1)?.sub(&wedge(v2, e2)?).scale(1.0 / (4.0 * m));
    let v1n2 = v1.dot(v1);
    let v2n2 = v2.dot(v2);
    let v12 = v1.dot(v2);

    let mut r = FirstOrderResiduals {
        h: 0.0,
        gauss: 0.0,
        a_tt: 0.0,
        a_tth: 0.0,
        a_thth: 0.0,
        gauss_curvature: 0.0,
        normal_curvature: 0.0,
        scalar_speed: 0.0,
    };
    for it in 0..d.t_nodes() {
        let t = d.t_node(it);
        for j in 0..d.n_th {
            let th = d.th_node(j);
            let node = gf.node(it, j);
            let (sn, cs) = (m * th).sin_cos();
            let (sn2, cs2) = (2.0 * m * th).sin_cos();
            let mut vmode = v1.scale(cs);
            vmode.axpy(sn, v2);
            let mut vmode_rot = v1.scale(sn);
            vmode_rot.axpy(-cs, v2);

            let grow = (m * t).exp();
            let decay = (-m * t).exp();
            r.h = r.h.max(node.h.scale(1.0 / eps).sub(&vmode.scale(grow)).norm());
            r.a_tt = r
                .a_tt
                .max(node.att.scale(1.0 / eps).sub(&vmode.scale(0.5 * decay)).norm());
            r.a_thth = r
                .a_thth
                .max(node.ahh.scale(1.0 / eps).sub(&vmode.scale(0.5 * decay)).norm());
            r.a_tth = r.a_tth.max(
                node.ath
                    .scale(1.0 / eps)
                    .sub(&vmode_rot.scale(0.5 * decay))
                    .norm(),
            );

            let mut limit_n = b_lin.scale(t);
            limit_n.axpy(-cs2, &b_cos);
            limit_n.axpy(sn2, &b_sin);
            let gauss_dev = node
                .nrm
                .sub(&ctx.n_bar)
                .scale(1.0 / eps)
                .sub(&limit_n)
                .norm();
            r.gauss = r.gauss.max(gauss_dev);

            let k_limit =
                0.25 * grow * grow * ((v1n2 - v2n2) * cs2 + 2.0 * v12 * sn2);
            r.gauss_curvature = r
                .gauss_curvature
                .max((node.k / (eps * eps) - k_limit).abs());
            r.normal_curvature = r.normal_curvature.max(node.kperp.norm() / (eps * eps));
        }
    }
    let it0 = d.t_index(0.0)?;
    let mut dn_avg = Bivector::zeros(gf.n);
    for j in 0..d.n_th {
        dn_avg.axpy(1.0 / d.n_th as f64, &gf.dtn[gf.idx(it0, j)]);
    }
    r.scalar_speed = dn_avg.norm() / eps;
    Ok(r)
}

/// The two second-order residuals: distance of (f̂−G₁f̂)/ε̂ from its
/// closed-form limit modulo an additive constant, and the sup of the
/// components of (Ĥ−F₁Ĥ)/ε̂² orthogonal to span{e₁, e₂}.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SecondOrderResiduals {
    pub position: f64,
    pub span: f64,
}

pub fn second_order_residuals(
    ctx: &NeckContext,
    frame: &NeckFrame,
) -> Result<SecondOrderResiduals> {
    let gf = &ctx.gf;
    let d = &ctx.domain;
    let m = d.m as f64;
    let eps = ctx.eps;
    let seg_len = d.seg_len;
    let n = gf.n;

    let fpos = GridField::position(gf);
    let gmode = project_g(&fpos, 1)?;
    let mut dev = vec![Vector::zeros(n); gf.nodes.len()];
    for it in 0..d.t_nodes() {
        let t = d.t_node(it);
        let amp = (-(0.5 / m) * (t - seg_len / 2.0) - 0.25 / (m * m)) * (-m * t).exp();
        for j in 0..d.n_th {
            let th = d.th_node(j);
            let (sn, cs) = (m * th).sin_cos();
            let mut phi = frame.v1.scale(amp * cs);
            phi.axpy(amp * sn, &frame.v2);
            let node = gf.node(it, j);
            let mut r = node.f.sub(&gmode.eval(t, th)).scale(1.0 / eps);
            r = r.sub(&phi);
            dev[gf.idx(it, j)] = r;
        }
    }
    // Modulo an additive constant: subtract the window mean per component.
    let mut mean = Vector::zeros(n);
    for v in &dev {
        mean.axpy(1.0 / dev.len() as f64, v);
    }
    let position = dev
        .iter()
        .map(|v| v.sub(&mean).norm())
        .fold(0.0, f64::max);

    let hfield = GridField::mean_curvature(gf);
    let fmode = project_f(&hfield, 1)?;
    let mut span = 0.0f64;
    for it in 0..d.t_nodes() {
        let t = d.t_node(it);
        for j in 0..d.n_th {
            let th = d.th_node(j);
            let node = gf.node(it, j);
            let mut r = node.h.sub(&fmode.eval(t, th)).scale(1.0 / (eps * eps));
            r.axpy(-r.dot(&frame.e1), &frame.e1);
            r.axpy(-r.dot(&frame.e2), &frame.e2);
            span = span.max(r.norm());
        }
    }
    Ok(SecondOrderResiduals { position, span })
}

/// Fritsch-Carlson monotone cubic slopes for strictly increasing data.
fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = (0..n - 1).map(|i| x[i + 1] - x[i]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
    let mut d = vec![0.0; n];
    d[0] = delta[0];
    d[n - 1] = delta[n - 2];
    for i in 1..n - 1 {
        if delta[i - 1] * delta[i] <= 0.0 {
            d[i] = 0.0;
        } else {
            let w1 = 2.0 * h[i] + h[i - 1];
            let w2 = h[i] + 2.0 * h[i - 1];
            d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
        }
    }
    d
}

/// Evaluate the monotone cubic interpolant at `xq` (clamped to the range).
fn pchip_eval(x: &[f64], y: &[f64], d: &[f64], xq: f64) -> f64 {
    let n = x.len();
    if xq <= x[0] {
        return y[0];
    }
    if xq >= x[n - 1] {
        return y[n - 1];
    }
    let mut lo = 0;
    let mut hi = n - 1;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if x[mid] <= xq {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let h = x[hi] - x[lo];
    let s = (xq - x[lo]) / h;
    let (s2, s3) = (s * s, s * s * s);
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    h00 * y[lo] + h10 * h * d[lo] + h01 * y[hi] + h11 * h * d[hi]
}

/// Cubic Hermite evaluation on a uniform grid with known derivatives.
fn hermite_eval(t0: f64, h: f64, y: &[f64], dy: &[f64], tq: f64) -> f64 {
    let n = y.len();
    let x = ((tq - t0) / h).clamp(0.0, (n - 1) as f64);
    let lo = (x.floor() as usize).min(n - 2);
    let s = x - lo as f64;
    let (s2, s3) = (s * s, s * s * s);
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    h00 * y[lo] + h10 * h * dy[lo] + h01 * y[lo + 1] + h11 * h * dy[lo + 1]
}

/// The θ-averaged Gauss-map curve α(t) = (1/2π)∫𝔫 dθ, its speed, arc
/// length, and the geodesic defect of its arc-length parametrization.
#[derive(Debug, Clone)]
pub struct GaussCurve {
    pub t: Vec<f64>,
    pub alpha: Vec<Bivector>,
    pub speed: Vec<f64>,
    /// Cumulative arc length at the t-nodes.
    pub s: Vec<f64>,
    pub length: f64,
    /// Uniform arc-length resampling.
    pub s_grid: Vec<f64>,
    pub t_of_s: Vec<f64>,
    pub alpha_s: Vec<Bivector>,
    pub speed_s: Vec<f64>,
    /// Normalized tangential part of d²α/ds² at the nearest Grassmann
    /// point; 0 for a geodesic. Ends are trimmed and carry the nearest
    /// interior value.
    pub defect: Vec<f64>,
    pub mean_defect: f64,
}

pub fn gauss_curve(gf: &GeometryField) -> Result<GaussCurve> {
    let d = &gf.domain;
    let nt = d.t_nodes();
    let nth = d.n_th;
    let n = gf.n;
    let bdim = n * (n - 1) / 2;
    let t: Vec<f64> = (0..nt).map(|it| d.t_node(it)).collect();
    let mut alpha = vec![Bivector::zeros(n); nt];
    for (it, a) in alpha.iter_mut().enumerate() {
        for j in 0..nth {
            a.axpy(1.0 / nth as f64, &gf.node(it, j).nrm);
        }
    }
    // Coefficient lines and their t-derivatives.
    let coeff: Vec<Vec<f64>> = (0..bdim)
        .map(|c| alpha.iter().map(|a| a.coeffs()[c]).collect())
        .collect();
    let dcoeff: Vec<Vec<f64>> = coeff
        .iter()
        .map(|line| stencil::deriv_line(line, d.ht(), 1))
        .collect();
    let speed: Vec<f64> = (0..nt)
        .map(|it| {
            dcoeff
                .iter()
                .map(|line| line[it] * line[it])
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    // The curve lives on unit bivectors, so genuine speeds are far above the
    // differentiation noise floor; the absolute cutoff catches constant
    // curves whose numerical speed is pure roundoff.
    let max_speed = speed.iter().cloned().fold(0.0, f64::max);
    let floor = (1e-12 * max_speed).max(1e-10);
    if let Some(it) = speed.iter().position(|&v| v <= floor) {
        return Err(Error::Degenerate(format!(
            "Gauss-map speed vanishes near t = {}; arc-length parametrization fails",
            t[it]
        )));
    }
    let mut s = vec![0.0; nt];
    for it in 1..nt {
        s[it] = s[it - 1] + 0.5 * (speed[it - 1] + speed[it]) * d.ht();
    }
    let length = s[nt - 1];

    // Uniform resampling in arc length via the monotone inverse t(s).
    let t_slope = pchip_slopes(&s, &t);
    let n_s = nt;
    let ds = length / (n_s - 1) as f64;
    let s_grid: Vec<f64> = (0..n_s).map(|i| i as f64 * ds).collect();
    let t_of_s: Vec<f64> = s_grid
        .iter()
        .map(|&sv| pchip_eval(&s, &t, &t_slope, sv))
        .collect();
    let coeff_s: Vec<Vec<f64>> = (0..bdim)
        .map(|c| {
            t_of_s
                .iter()
                .map(|&tv| hermite_eval(t[0], d.ht(), &coeff[c], &dcoeff[c], tv))
                .collect()
        })
        .collect();
    let alpha_s: Vec<Bivector> = (0..n_s)
        .map(|i| {
            let mut b = Bivector::zeros(n);
            let mut c = 0;
            for a in 0..n {
                for bb in (a + 1)..n {
                    b.set(a, bb, coeff_s[c][i]);
                    c += 1;
                }
            }
            b
        })
        .collect();
    let speed_s: Vec<f64> = t_of_s
        .iter()
        .map(|&tv| hermite_eval(t[0], d.ht(), &speed, &stencil::deriv_line(&speed, d.ht(), 1), tv))
        .collect();
    let d2: Vec<Vec<f64>> = coeff_s
        .iter()
        .map(|line| stencil::deriv_line(line, ds, 2))
        .collect();

    let trim = 2usize;
    let mut defect = vec![0.0; n_s];
    let mut acc_defect = 0.0;
    let mut count = 0usize;
    for i in trim..n_s - trim {
        let mut curv = Bivector::zeros(n);
        let mut c = 0;
        for a in 0..n {
            for bb in (a + 1)..n {
                curv.set(a, bb, d2[c][i]);
                c += 1;
            }
        }
        let cn = curv.norm();
        defect[i] = if cn == 0.0 {
            0.0
        } else {
            let gp = nearest_grassmann(&alpha_s[i])?;
            grassmann_tangent_project(&gp, &curv)?.norm() / cn
        };
        acc_defect += defect[i];
        count += 1;
    }
    for i in 0..trim {
        defect[i] = defect[trim];
        defect[n_s - 1 - i] = defect[n_s - 1 - trim];
    }
    Ok(GaussCurve {
        t,
        alpha,
        speed,
        s,
        length,
        s_grid,
        t_of_s,
        alpha_s,
        speed_s,
        mean_defect: acc_defect / count.max(1) as f64,
        defect,
    })
}

/// CSV of the resampled curve: s, t, α components, speed, defect.
pub fn curve_csv(curve: &GaussCurve) -> String {
    let bdim = curve.alpha_s[0].coeffs().len();
    let mut out = String::from("s,t");
    for c in 0..bdim {
        out.push_str(&format!(",alpha_{c}"));
    }
    out.push_str(",speed,defect\n");
    for i in 0..curve.s_grid.len() {
        out.push_str(&format!("{:.16e},{:.16e}", curve.s_grid[i], curve.t_of_s[i]));
        for c in curve.alpha_s[i].coeffs() {
            out.push_str(&format!(",{c:.16e}"));
        }
        out.push_str(&format!(
            ",{:.16e},{:.16e}\n",
            curve.speed_s[i], curve.defect[i]
        ));
    }
    out
}

/// Per-k gaps of the energy/length identities on the rotation family.
#[derive(Debug, Clone, serde::Serialize)]
pub struct IdentityGaps {
    pub k: f64,
    pub w_total: f64,
    pub tau2_norm: f64,
    pub length: f64,
    /// |W − ‖τ₂‖²T/8π| / W.
    pub gap_energy: f64,
    /// |length − ‖τ₂‖T/(4√2π)| / length.
    pub gap_length: f64,
    /// Max over middle segments of |‖τ₂‖/√W(Q_i) − 2√(2π/L)|.
    pub gap_segment: f64,
    /// Mean geodesic defect of the Gauss-map curve.
    pub mean_defect: f64,
}

/// Evaluate the identities on the rotation family with l = 1/k over
/// [0, T(k)]×S¹. `n_t_per_seg` t-intervals per segment (even),
/// `trim_segments` excluded per end for the middle-segment gap.
pub fn identity_checks(
    ks: &[f64],
    t_of_k: impl Fn(f64) -> f64 + Sync,
    seg_len: f64,
    n_t_per_seg: usize,
    n_th: usize,
    trim_segments: usize,
) -> Result<Vec<IdentityGaps>> {
    use std::f64::consts::PI;
    let rows: Vec<Result<IdentityGaps>> = ks
        .par_iter()
        .map(|&k| {
            let s = sampler_r3(&RotationFamilyR3::new(1.0 / k))?;
            let t_end = t_of_k(k);
            let segs = (t_end / seg_len).round() as usize;
            let d = CylinderDomain::new(0.0, t_end, seg_len, 1, segs * n_t_per_seg, n_th)?;
            let gf = sample_geometry(&s, &d)?;
            let w_total = willmore_energy_total(&gf)?;
            let mid_slice = d.t_node(d.n_t / 2);
            let tau2 = residue::tau2_components(&gf, mid_slice)?;
            let tau2_norm = tau2.iter().map(|x| x * x).sum::<f64>().sqrt();
            let curve = gauss_curve(&gf)?;
            let length = curve.length;
            let gap_energy =
                (w_total - tau2_norm * tau2_norm * t_end / (8.0 * PI)).abs() / w_total;
            let gap_length = (length
                - tau2_norm * t_end / (4.0 * (2.0f64).sqrt() * PI))
                .abs()
                / length;
            let target = 2.0 * (2.0 * PI / seg_len).sqrt();
            let mut gap_segment = 0.0f64;
            for i in trim_segments..segs.saturating_sub(trim_segments) {
                let wq = willmore_energy(&gf, i)?;
                gap_segment = gap_segment.max((tau2_norm / wq.sqrt() - target).abs());
            }
            Ok(IdentityGaps {
                k,
                w_total,
                tau2_norm,
                length,
                gap_energy,
                gap_length,
                gap_segment,
                mean_defect: curve.mean_defect,
            })
        })
        .collect();
    rows.into_iter().collect()
}

/// Full per-k neck summary on the rotation family, hatted at the middle
/// segment of a [0, 3L] base cylinder.
#[derive(Debug, Clone, serde::Serialize)]
pub struct NeckEntry {
    pub k: f64,
    pub eps_hat: f64,
    pub e1: Vec<f64>,
    pub e2: Vec<f64>,
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
    pub frame_rescale: f64,
    pub first: FirstOrderResiduals,
    pub second: SecondOrderResiduals,
    /// Max over the skew basis of |τ₂(S)/ε̂ + 4π𝕃(S)|.
    pub tau2_pairing_defect: f64,
    pub tau2_norm_over_sqrt_w: f64,
}

pub fn analyze_family_neck(
    k: f64,
    seg_len: f64,
    n_t: usize,
    n_th: usize,
) -> Result<NeckEntry> {
    let s = sampler_r3(&RotationFamilyR3::new(1.0 / k))?;
    let ctx = neck_context(&s, 2, seg_len, 1, n_t, n_th)?;
    let frame = extract_frame(&ctx)?;
    let first = first_order_residuals(&ctx, &frame)?;
    let second = second_order_residuals(&ctx, &frame)?;

    let n = ctx.gf.n;
    let mut pairing = 0.0f64;
    let mut tau2_sq = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            let sk = SkewMatrix::unit_basis(n, i, j);
            let t2 = residue::tau2_slice(&ctx.gf, 0.0, &sk)?;
            let ell = residue::l_functional(&frame.v1, &frame.v2, &frame.e1, &frame.e2, &sk);
            pairing = pairing.max((t2 / ctx.eps + 4.0 * std::f64::consts::PI * ell).abs());
            tau2_sq += t2 * t2;
        }
    }
    let w1 = willmore_energy(&ctx.gf, 1)?;
    Ok(NeckEntry {
        k,
        eps_hat: ctx.eps,
        e1: frame.e1.0.clone(),
        e2: frame.e2.0.clone(),
        v1: frame.v1.0.clone(),
        v2: frame.v2.0.clone(),
        frame_rescale: frame.rescale,
        first,
        second,
        tau2_pairing_defect: pairing,
        tau2_norm_over_sqrt_w: tau2_sq.sqrt() / w1.sqrt(),
    })
}

/// Convergence CSV: k, residual name, value.
pub fn convergence_csv(entries: &[NeckEntry]) -> String {
    let mut out = String::from("k,quantity,value\n");
    for e in entries {
        let rows = [
            ("eps_hat", e.eps_hat),
            ("h", e.first.h),
            ("gauss", e.first.gauss),
            ("a_tt", e.first.a_tt),
            ("a_tth", e.first.a_tth),
            ("a_thth", e.first.a_thth),
            ("gauss_curvature", e.first.gauss_curvature),
            ("normal_curvature", e.first.normal_curvature),
            ("scalar_speed", e.first.scalar_speed),
            ("position_2nd", e.second.position),
            ("span_2nd", e.second.span),
            ("tau2_pairing_defect", e.tau2_pairing_defect),
        ];
        for (name, value) in rows {
            out.push_str(&format!("{},{},{:.16e}\n", e.k, name, value));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SyntheticImmersion;
    use crate::model::SkewRotation;
    use crate::residue::AffineImage;

    fn family(k: f64) -> crate::model::Cover<crate::model::RotatedCylinder> {
        sampler_r3(&RotationFamilyR3::new(1.0 / k)).unwrap()
    }

    #[test]
    fn hatting_centers_and_ignores_recentering() {
        let s = family(100.0);
        let ctx = neck_context(&s, 2, 1.0, 1, 32, 64).unwrap();
        assert!(ctx.centering_defect < 1e-12, "{}", ctx.centering_defect);
        assert!((ctx.eps * 100.0 - 2.0).abs() < 0.1, "eps {}", ctx.eps);

        // Adding a constant to f before hatting changes nothing.
        let shifted = AffineImage::translated(&s, Vector(vec![0.7, -1.3, 0.4]));
        let ctx2 = neck_context(&shifted, 2, 1.0, 1, 32, 64).unwrap();
        assert!((ctx.eps - ctx2.eps).abs() < 1e-13);
        let f1 = extract_frame(&ctx).unwrap();
        let f2 = extract_frame(&ctx2).unwrap();
        assert!(f1.v1.sub(&f2.v1).norm() < 1e-10);
        let r1 = first_order_residuals(&ctx, &f1).unwrap();
        let r2 = first_order_residuals(&ctx2, &f2).unwrap();
        assert!((r1.h - r2.h).abs() < 1e-10);
    }

    #[test]
    fn frame_matches_model_direction() {
        let s = family(200.0);
        let ctx = neck_context(&s, 2, 1.0, 1, 32, 64).unwrap();
        let frame = extract_frame(&ctx).unwrap();
        // The family is conformal only to O(l²): g_tt/g_θθ = 1 + l²cos²θ,
        // so the frame defect at k = 200 sits near l²/2 ≈ 1.25e-5.
        assert!(frame.orthonormality_defect < 1e-4);
        assert!((frame.rescale - 1.0).abs() < 0.1, "rescale {}", frame.rescale);
        // v2 ≈ 0 and v1 along ±e3-direction after undoing the slow rotation;
        // at k=200 the drift over one segment is below the tolerance.
        assert!(frame.v2.norm() < 0.05, "v2 {:?}", frame.v2);
        let z = frame.v1.0[2].abs();
        assert!((z - 1.0).abs() < 0.05, "v1 {:?}", frame.v1);
    }

    #[test]
    fn degenerate_inputs_error() {
        // Flat cylinder limit: H = 0, so the neck energy vanishes.
        let flat = SyntheticImmersion::flat_limit(3, 1);
        let err = neck_context(&flat, 2, 1.0, 1, 32, 64);
        assert!(err.is_err());
    }

    #[test]
    fn first_order_limits_hold() {
        let s = family(100.0);
        let ctx = neck_context(&s, 2, 1.0, 1, 48, 64).unwrap();
        let frame = extract_frame(&ctx).unwrap();
        let r = first_order_residuals(&ctx, &frame).unwrap();
        assert!(r.max_field_residual() < 0.1, "{r:?}");
        assert!(r.scalar_speed > 0.45 && r.scalar_speed < 0.55, "{}", r.scalar_speed);
        let r2 = second_order_residuals(&ctx, &frame).unwrap();
        assert!(r2.span < 0.1, "span {}", r2.span);
        assert!(r2.position.is_finite());
    }

    #[test]
    fn frame_covariance_under_rotation() {
        let s = family(100.0);
        let mut gen = nalgebra::DMatrix::zeros(3, 3);
        gen[(0, 1)] = 0.3;
        gen[(1, 0)] = -0.3;
        gen[(1, 2)] = -0.8;
        gen[(2, 1)] = 0.8;
        let rot = SkewRotation::new(gen).unwrap().exp(1.0);
        let rs = AffineImage::linear(&s, rot.clone());
        let ctx = neck_context(&s, 2, 1.0, 1, 32, 64).unwrap();
        let ctx_r = neck_context(&rs, 2, 1.0, 1, 32, 64).unwrap();
        let f = extract_frame(&ctx).unwrap();
        let f_r = extract_frame(&ctx_r).unwrap();
        let rot_v = |v: &Vector| {
            let mut out = Vector::zeros(3);
            for i in 0..3 {
                for j in 0..3 {
                    out.0[i] += rot[(i, j)] * v.0[j];
                }
            }
            out
        };
        assert!(rot_v(&f.e1).sub(&f_r.e1).norm() < 1e-8);
        assert!(rot_v(&f.v1).sub(&f_r.v1).norm() < 1e-8);
        let r = first_order_residuals(&ctx, &f).unwrap();
        let rr = first_order_residuals(&ctx_r, &f_r).unwrap();
        assert!((r.h - rr.h).abs() < 1e-8);
        assert!((r.gauss - rr.gauss).abs() < 1e-8);
    }

    #[test]
    fn gauss_curve_speed_and_defect() {
        let k = 100.0;
        let s = family(k);
        let d = CylinderDomain::new(0.0, 10.0, 1.0, 1, 200, 64).unwrap();
        let gf = sample_geometry(&s, &d).unwrap();
        let curve = gauss_curve(&gf).unwrap();
        for &v in &curve.speed {
            assert!(v * k > 0.95 && v * k < 1.05, "speed*k = {}", v * k);
        }
        assert!(curve.mean_defect < 0.1, "defect {}", curve.mean_defect);
        let csv = curve_csv(&curve);
        assert!(csv.starts_with("s,t,alpha_0"));

        // Constant Gauss map: speed vanishes, reparametrization must fail.
        let round = SyntheticImmersion::round_cylinder();
        let d = CylinderDomain::new(0.0, 2.0, 1.0, 1, 32, 64).unwrap();
        let gf = sample_geometry(&round, &d).unwrap();
        assert!(gauss_curve(&gf).is_err());
    }

    #[test]
    fn identity_gaps_small() {
        let rows = identity_checks(&[50.0], |_| 10.0, 1.0, 8, 64, 2).unwrap();
        let r = &rows[0];
        assert!(r.gap_energy < 0.05, "gap1 {}", r.gap_energy);
        assert!(r.gap_length < 0.05, "gap2 {}", r.gap_length);
        assert!(r.gap_segment < 0.2, "gap3 {}", r.gap_segment);
    }

    #[test]
    fn tau2_pairing_defect_decays() {
        let e1 = analyze_family_neck(50.0, 1.0, 32, 64).unwrap();
        let e2 = analyze_family_neck(100.0, 1.0, 32, 64).unwrap();
        assert!(e2.tau2_pairing_defect < e1.tau2_pairing_defect);
        // ‖τ₂‖/√W(Q_i) → 2√(2π/L).
        let target = 2.0 * (2.0 * std::f64::consts::PI).sqrt();
        assert!(
            (e2.tau2_norm_over_sqrt_w - target).abs() < 0.05 * target,
            "{} vs {target}",
            e2.tau2_norm_over_sqrt_w
        );
        let csv = convergence_csv(&[e1, e2]);
        assert!(csv.lines().count() > 20);
    }
}
