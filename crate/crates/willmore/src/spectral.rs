//! Circle-slice Fourier machinery on cylinder grids.
//!
//! For a (scalar or vector valued) field u on [t0,t1]×S¹ and the frequency
//! weight m of the domain:
//!
//! ```text
//! φ(t)  = (1/π)(∫ u cos mθ dθ, ∫ u sin mθ dθ)
//! g⁺    = φ' + mφ,   g⁻ = mφ − φ'
//! F_i u = (g⁺(mid)/2m)·(cos mθ, sin mθ)·e^{ m(t−mid)},  mid = (2i−1)L/2
//! G_i u = (g⁻(mid)/2m)·(cos mθ, sin mθ)·e^{−m(t−mid)}
//! ```
//!
//! together with the weighted segment energies E, E*, E† and the statistics
//! γ, λ, ν, μ. On harmonic inputs F_i and G_i reproduce the growing and
//! decaying frequency-m modes exactly.

use crate::geometry::{CylinderDomain, GeometryField};
use crate::stencil;
use crate::{Error, Result, Vector};

/// Field sampled on the cylinder grid, component count `dim`
/// (1 for scalars, n for H, n(n-1)/2 for bivector fields).
#[derive(Debug, Clone)]
pub struct GridField {
    pub domain: CylinderDomain,
    pub dim: usize,
    /// Node-major storage: data[(it*n_th + j)*dim + c].
    pub data: Vec<f64>,
}

impl GridField {
    pub fn from_fn(
        domain: &CylinderDomain,
        dim: usize,
        f: impl Fn(f64, f64) -> Vec<f64>,
    ) -> Self {
        let mut data = Vec::with_capacity(domain.t_nodes() * domain.n_th * dim);
        for it in 0..domain.t_nodes() {
            for j in 0..domain.n_th {
                let v = f(domain.t_node(it), domain.th_node(j));
                assert_eq!(v.len(), dim);
                data.extend_from_slice(&v);
            }
        }
        GridField {
            domain: domain.clone(),
            dim,
            data,
        }
    }

    pub fn get(&self, it: usize, j: usize) -> &[f64] {
        let idx = (it * self.domain.n_th + j) * self.dim;
        &self.data[idx..idx + self.dim]
    }

    /// Mean curvature field of a geometry grid.
    pub fn mean_curvature(gf: &GeometryField) -> Self {
        let mut data = Vec::with_capacity(gf.nodes.len() * gf.n);
        for node in &gf.nodes {
            data.extend_from_slice(&node.h.0);
        }
        GridField {
            domain: gf.domain.clone(),
            dim: gf.n,
            data,
        }
    }

    /// Position field of a geometry grid.
    pub fn position(gf: &GeometryField) -> Self {
        let mut data = Vec::with_capacity(gf.nodes.len() * gf.n);
        for node in &gf.nodes {
            data.extend_from_slice(&node.f.0);
        }
        GridField {
            domain: gf.domain.clone(),
            dim: gf.n,
            data,
        }
    }
}

/// φ(t) at one grid line: the frequency-m cosine/sine pair.
#[derive(Debug, Clone)]
pub struct SliceProjection {
    pub t: f64,
    pub c: Vector,
    pub s: Vector,
}

impl SliceProjection {
    pub fn norm(&self) -> f64 {
        (self.c.dot(&self.c) + self.s.dot(&self.s)).sqrt()
    }
}

/// φ at a grid-aligned t value.
pub fn phi(field: &GridField, t: f64) -> Result<SliceProjection> {
    let it = field.domain.t_index(t)?;
    Ok(phi_at_index(field, it))
}

pub fn phi_at_index(field: &GridField, it: usize) -> SliceProjection {
    let d = &field.domain;
    let m = d.m as f64;
    let mut c = Vector::zeros(field.dim);
    let mut s = Vector::zeros(field.dim);
    for j in 0..d.n_th {
        let th = d.th_node(j);
        let (sn, cs) = (m * th).sin_cos();
        let vals = field.get(it, j);
        for comp in 0..field.dim {
            c.0[comp] += vals[comp] * cs;
            s.0[comp] += vals[comp] * sn;
        }
    }
    let w = d.hth() / std::f64::consts::PI;
    SliceProjection {
        t: d.t_node(it),
        c: c.scale(w),
        s: s.scale(w),
    }
}

/// φ, φ' and the fluxes g± along the whole t-grid. φ' uses fourth-order
/// stencils, one-sided at the ends.
pub struct FluxLine {
    pub phi: Vec<SliceProjection>,
    pub gplus: Vec<SliceProjection>,
    pub gminus: Vec<SliceProjection>,
}

pub fn g_fluxes(field: &GridField) -> FluxLine {
    let d = &field.domain;
    let m = d.m as f64;
    let nt = d.t_nodes();
    let phis: Vec<SliceProjection> = (0..nt).map(|it| phi_at_index(field, it)).collect();
    let mut dphi_c = vec![Vector::zeros(field.dim); nt];
    let mut dphi_s = vec![Vector::zeros(field.dim); nt];
    for comp in 0..field.dim {
        let line_c: Vec<f64> = phis.iter().map(|p| p.c.0[comp]).collect();
        let line_s: Vec<f64> = phis.iter().map(|p| p.s.0[comp]).collect();
        let dc = stencil::deriv_line(&line_c, d.ht(), 1);
        let ds = stencil::deriv_line(&line_s, d.ht(), 1);
        for it in 0..nt {
            dphi_c[it].0[comp] = dc[it];
            dphi_s[it].0[comp] = ds[it];
        }
    }
    let mut gplus = Vec::with_capacity(nt);
    let mut gminus = Vec::with_capacity(nt);
    for it in 0..nt {
        let p = &phis[it];
        gplus.push(SliceProjection {
            t: p.t,
            c: dphi_c[it].add(&p.c.scale(m)),
            s: dphi_s[it].add(&p.s.scale(m)),
        });
        gminus.push(SliceProjection {
            t: p.t,
            c: p.c.scale(m).sub(&dphi_c[it]),
            s: p.s.scale(m).sub(&dphi_s[it]),
        });
    }
    FluxLine {
        phi: phis,
        gplus,
        gminus,
    }
}

/// A projected mode a·cos mθ + b·sin mθ times e^{±m(t−mid)}.
#[derive(Debug, Clone)]
pub struct ProjectedMode {
    pub a: Vector,
    pub b: Vector,
    pub mid: f64,
    /// +1 for F (growing), −1 for G (decaying).
    pub sign: f64,
    pub m: f64,
}

impl ProjectedMode {
    pub fn eval(&self, t: f64, th: f64) -> Vector {
        let amp = (self.sign * self.m * (t - self.mid)).exp();
        let (sn, cs) = (self.m * th).sin_cos();
        let mut out = self.a.scale(amp * cs);
        out.axpy(amp * sn, &self.b);
        out
    }
}

fn segment_mid(d: &CylinderDomain, seg: usize) -> f64 {
    d.t0 + (seg as f64 + 0.5) * d.seg_len
}

/// F_i projector of the field onto the growing m-mode of 0-based segment `seg`.
pub fn project_f(field: &GridField, seg: usize) -> Result<ProjectedMode> {
    let d = &field.domain;
    let mid = segment_mid(d, seg);
    let it = d.t_index(mid)?;
    let fl = g_fluxes(field);
    let g = &fl.gplus[it];
    let m = d.m as f64;
    Ok(ProjectedMode {
        a: g.c.scale(1.0 / (2.0 * m)),
        b: g.s.scale(1.0 / (2.0 * m)),
        mid,
        sign: 1.0,
        m,
    })
}

/// G_i projector onto the decaying m-mode.
pub fn project_g(field: &GridField, seg: usize) -> Result<ProjectedMode> {
    let d = &field.domain;
    let mid = segment_mid(d, seg);
    let it = d.t_index(mid)?;
    let fl = g_fluxes(field);
    let g = &fl.gminus[it];
    let m = d.m as f64;
    Ok(ProjectedMode {
        a: g.c.scale(1.0 / (2.0 * m)),
        b: g.s.scale(1.0 / (2.0 * m)),
        mid,
        sign: -1.0,
        m,
    })
}

/// Weight of the segment energies: e^{-2mt} (the default) or e^{+2mt}
/// (the t → −t mirror used on the left tail).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergyWeight {
    Decaying,
    Growing,
}

impl EnergyWeight {
    fn eval(self, m: f64, t: f64) -> f64 {
        match self {
            EnergyWeight::Decaying => (-2.0 * m * t).exp(),
            EnergyWeight::Growing => (2.0 * m * t).exp(),
        }
    }
}

/// Segment statistics of one field.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SegmentSpectra {
    pub seg: usize,
    pub gamma: f64,
    pub e: f64,
    pub e_star: f64,
    pub e_dagger: f64,
    pub lambda: f64,
    /// f64::INFINITY encodes the ν = ∞ convention (E* = 0 < E†).
    pub nu: f64,
    pub mu: Option<f64>,
    pub f_coef_c: Vec<f64>,
    pub f_coef_s: Vec<f64>,
    pub g_coef_c: Vec<f64>,
    pub g_coef_s: Vec<f64>,
}

/// Weighted L² of a field over a segment, with an optional reference mode
/// subtracted pointwise.
fn weighted_energy(
    field: &GridField,
    seg: usize,
    weight: EnergyWeight,
    subtract: Option<&ProjectedMode>,
) -> Result<f64> {
    let d = &field.domain;
    let (lo, hi) = d.segment_nodes(seg)?;
    let m = d.m as f64;
    let line: Vec<f64> = (lo..=hi)
        .map(|it| {
            let t = d.t_node(it);
            let w = weight.eval(m, t);
            let vals: Vec<f64> = (0..d.n_th)
                .map(|j| {
                    let th = d.th_node(j);
                    let v = field.get(it, j);
                    let mut acc = 0.0;
                    match subtract {
                        None => {
                            for x in v {
                                acc += x * x;
                            }
                        }
                        Some(mode) => {
                            let mv = mode.eval(t, th);
                            for (x, y) in v.iter().zip(&mv.0) {
                                let dxy = x - y;
                                acc += dxy * dxy;
                            }
                        }
                    }
                    acc * w
                })
                .collect();
            stencil::rect_circle(&vals)
        })
        .collect();
    Ok(stencil::simpson(&line, d.ht()))
}

/// Weighted L² of a projected mode itself over a segment (direct quadrature;
/// the literature's closed form 2πγ²L/(2m)² overstates this by a factor of
/// two, so no closed form is used here).
fn mode_energy(d: &CylinderDomain, mode: &ProjectedMode, seg: usize, weight: EnergyWeight) -> f64 {
    let (lo, hi) = d.segment_nodes(seg).expect("segment in range");
    let m = d.m as f64;
    let line: Vec<f64> = (lo..=hi)
        .map(|it| {
            let t = d.t_node(it);
            let w = weight.eval(m, t);
            let vals: Vec<f64> = (0..d.n_th)
                .map(|j| {
                    let v = mode.eval(t, d.th_node(j));
                    v.dot(&v) * w
                })
                .collect();
            stencil::rect_circle(&vals)
        })
        .collect();
    stencil::simpson(&line, d.ht())
}

/// All segment statistics. μ is filled when a geometry grid is supplied.
pub fn segment_spectra(
    field: &GridField,
    seg: usize,
    weight: EnergyWeight,
    geometry: Option<&GeometryField>,
) -> Result<SegmentSpectra> {
    let d = &field.domain;
    let m = d.m as f64;
    let fmode = project_f(field, seg)?;
    let gmode = project_g(field, seg)?;
    let mid = segment_mid(d, seg);
    let gamma_pair_norm =
        (fmode.a.dot(&fmode.a) + fmode.b.dot(&fmode.b)).sqrt() * 2.0 * m;
    let gamma = gamma_pair_norm * (-m * mid).exp();
    let e = weighted_energy(field, seg, weight, None)?;
    let e_star = mode_energy(d, &fmode, seg, weight);
    let e_dagger = weighted_energy(field, seg, weight, Some(&fmode))?;
    let lambda = if e == 0.0 { 0.0 } else { (e_star / e).sqrt() };
    let nu = if e_star == 0.0 {
        if e_dagger == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        e_dagger / e_star
    };
    let mu = match geometry {
        Some(gf) => {
            let w = crate::geometry::willmore_energy(gf, seg)?;
            let a = crate::geometry::total_a_norm(gf, seg)?;
            Some(if a == 0.0 { 0.0 } else { w / a })
        }
        None => None,
    };
    Ok(SegmentSpectra {
        seg,
        gamma,
        e,
        e_star,
        e_dagger,
        lambda,
        nu,
        mu,
        f_coef_c: fmode.a.0.clone(),
        f_coef_s: fmode.b.0.clone(),
        g_coef_c: gmode.a.0.clone(),
        g_coef_s: gmode.b.0.clone(),
    })
}

/// Pohozaev flux defect max over components:
/// e^{-mt}g⁺(t) − e^{-ms}g⁺(s) − ∫ₛᵗ α e^{-mτ}dτ with α the φ-projection of
/// the (analytically supplied) Laplacian of the field.
pub fn pohozaev_defect(
    field: &GridField,
    laplacian: &GridField,
    s: f64,
    t: f64,
) -> Result<f64> {
    let d = &field.domain;
    let is = d.t_index(s)?;
    let it = d.t_index(t)?;
    if is >= it {
        return Err(Error::Domain("need s < t".into()));
    }
    let m = d.m as f64;
    let fl = g_fluxes(field);
    let alpha: Vec<SliceProjection> = (is..=it)
        .map(|k| phi_at_index(laplacian, k))
        .collect();
    let mut defect = 0.0f64;
    for comp in 0..field.dim {
        for part in 0..2 {
            let take = |p: &SliceProjection| {
                if part == 0 {
                    p.c.0[comp]
                } else {
                    p.s.0[comp]
                }
            };
            let lhs = (-m * d.t_node(it)).exp() * take(&fl.gplus[it])
                - (-m * d.t_node(is)).exp() * take(&fl.gplus[is]);
            let line: Vec<f64> = (is..=it)
                .map(|k| take(&alpha[k - is]) * (-m * d.t_node(k)).exp())
                .collect();
            // Simpson needs an even interval count; fall back to trapezoid
            // on odd spans.
            let integral = if (it - is) % 2 == 0 {
                stencil::simpson(&line, d.ht())
            } else {
                let mut acc = 0.0;
                for w in line.windows(2) {
                    acc += 0.5 * (w[0] + w[1]) * d.ht();
                }
                acc
            };
            defect = defect.max((lhs - integral).abs());
        }
    }
    Ok(defect)
}

/// CSV rows: seg, gamma, E, E*, E†, lambda, nu, mu.
pub fn spectra_csv(rows: &[SegmentSpectra]) -> String {
    let mut out = String::from("seg,gamma,E,E_star,E_dagger,lambda,nu,mu\n");
    for r in rows {
        out.push_str(&format!(
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}\n",
            r.seg + 1,
            r.gamma,
            r.e,
            r.e_star,
            r.e_dagger,
            r.lambda,
            r.nu,
            r.mu.map(|m| format!("{m:.16e}")).unwrap_or_default()
        ));
    }
    out
}
