//! Conservation-law residues of Willmore cylinders.
//!
//! The translation residue τ₁ (a vector) and the rotation residue τ₂ (a
//! linear functional on skew matrices) are flux integrals over a circle
//! slice {t}×S¹:
//!
//! ```text
//! τ₁    = −2∫∂_tH dθ − 4∫(H·A_ti) g^{ij}∂_jf dθ + ∫|H|²∂_tf dθ
//! τ₂(S) =  2∫(H·S∂_tf − ∂_tH·Sf)dθ − 4∫(H·A_ti) g^{ij}(∂_jf·Sf)dθ
//!           + ∫|H|²(∂_tf·Sf)dθ
//! ```
//!
//! On a Willmore surface both are independent of the slice; the per-slice
//! drift reported here is a numerical diagnostic. ‖τ₂‖ is the Euclidean norm
//! of the coefficients over the orthonormal skew basis (E_ij−E_ji)/√2 under
//! ⟨A,B⟩ = tr(ABᵀ).

use nalgebra::DMatrix;

use crate::geometry::{sample_geometry, CylinderDomain, GeometryField, Immersion};
use crate::stencil;
use crate::{Result, SkewMatrix, Vector};

/// τ₁ at the grid-aligned slice t.
pub fn tau1_slice(gf: &GeometryField, t: f64) -> Result<Vector> {
    let it = gf.domain.t_index(t)?;
    let nth = gf.domain.n_th;
    let mut out = Vector::zeros(gf.n);
    for c in 0..gf.n {
        let vals: Vec<f64> = (0..nth)
            .map(|j| {
                let idx = gf.idx(it, j);
                let node = &gf.nodes[idx];
                let s1 = node.h.dot(&node.att);
                let s2 = node.h.dot(&node.ath);
                let wt = node.ft.0[c] * node.i11 + node.fh.0[c] * node.i12;
                let wh = node.ft.0[c] * node.i12 + node.fh.0[c] * node.i22;
                -2.0 * gf.dth[idx].0[c] - 4.0 * (s1 * wt + s2 * wh)
                    + node.h.dot(&node.h) * node.ft.0[c]
            })
            .collect();
        out.0[c] = stencil::rect_circle(&vals);
    }
    Ok(out)
}

/// τ₂(S) at the grid-aligned slice t.
pub fn tau2_slice(gf: &GeometryField, t: f64, s: &SkewMatrix) -> Result<f64> {
    let it = gf.domain.t_index(t)?;
    let nth = gf.domain.n_th;
    let vals: Vec<f64> = (0..nth)
        .map(|j| {
            let idx = gf.idx(it, j);
            let node = &gf.nodes[idx];
            let sf = s.apply(&node.f);
            let sft = s.apply(&node.ft);
            let s1 = node.h.dot(&node.att);
            let s2 = node.h.dot(&node.ath);
            let wt = node.ft.scale(node.i11).add(&node.fh.scale(node.i12));
            let wh = node.ft.scale(node.i12).add(&node.fh.scale(node.i22));
            2.0 * (node.h.dot(&sft) - gf.dth[idx].dot(&sf))
                - 4.0 * (s1 * wt.dot(&sf) + s2 * wh.dot(&sf))
                + node.h.dot(&node.h) * node.ft.dot(&sf)
        })
        .collect();
    Ok(stencil::rect_circle(&vals))
}

/// τ₂ coefficients over the orthonormal skew basis, in pair order (i<j).
pub fn tau2_components(gf: &GeometryField, t: f64) -> Result<Vec<f64>> {
    let n = gf.n;
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            out.push(tau2_slice(gf, t, &SkewMatrix::unit_basis(n, i, j))?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct SliceResidues {
    pub t: f64,
    pub tau1: Vec<f64>,
    pub tau2: Vec<f64>,
    pub tau1_norm: f64,
    pub tau2_norm: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ResidueReport {
    pub slices: Vec<SliceResidues>,
    pub tau1_mean: Vec<f64>,
    pub tau2_mean: Vec<f64>,
    pub tau1_norm: f64,
    pub tau2_norm: f64,
    /// Max deviation of per-slice values from the mean, both residues.
    pub tau1_drift: f64,
    pub tau2_drift: f64,
}

/// Residues at every t-node, trimming `trim` nodes from each end where
/// one-sided ∂_tH stencils are least accurate.
pub fn residue_report(gf: &GeometryField, trim: usize) -> Result<ResidueReport> {
    let d = &gf.domain;
    let nt = d.t_nodes();
    assert!(nt > 2 * trim, "trim leaves no slices");
    let mut slices = Vec::with_capacity(nt - 2 * trim);
    for it in trim..nt - trim {
        let t = d.t_node(it);
        let tau1 = tau1_slice(gf, t)?;
        let tau2 = tau2_components(gf, t)?;
        let tau1_norm = tau1.norm();
        let tau2_norm = tau2.iter().map(|x| x * x).sum::<f64>().sqrt();
        slices.push(SliceResidues {
            t,
            tau1: tau1.0,
            tau2,
            tau1_norm,
            tau2_norm,
        });
    }
    let ns = slices.len() as f64;
    let mut tau1_mean = vec![0.0; gf.n];
    let mut tau2_mean = vec![0.0; slices[0].tau2.len()];
    for sl in &slices {
        for (acc, v) in tau1_mean.iter_mut().zip(&sl.tau1) {
            *acc += v / ns;
        }
        for (acc, v) in tau2_mean.iter_mut().zip(&sl.tau2) {
            *acc += v / ns;
        }
    }
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut tau1_drift = 0.0f64;
    let mut tau2_drift = 0.0f64;
    for sl in &slices {
        let d1: Vec<f64> = sl.tau1.iter().zip(&tau1_mean).map(|(a, b)| a - b).collect();
        let d2: Vec<f64> = sl.tau2.iter().zip(&tau2_mean).map(|(a, b)| a - b).collect();
        tau1_drift = tau1_drift.max(norm(&d1));
        tau2_drift = tau2_drift.max(norm(&d2));
    }
    Ok(ResidueReport {
        tau1_norm: norm(&tau1_mean),
        tau2_norm: norm(&tau2_mean),
        tau1_mean,
        tau2_mean,
        tau1_drift,
        tau2_drift,
        slices,
    })
}

/// CSV rows: t, tau1 components, tau1_norm, tau2 components, tau2_norm.
pub fn residues_csv(report: &ResidueReport) -> String {
    let n1 = report.tau1_mean.len();
    let n2 = report.tau2_mean.len();
    let mut header = String::from("t");
    for c in 0..n1 {
        header.push_str(&format!(",tau1_{c}"));
    }
    header.push_str(",tau1_norm");
    for c in 0..n2 {
        header.push_str(&format!(",tau2_{c}"));
    }
    header.push_str(",tau2_norm\n");
    let mut out = header;
    for sl in &report.slices {
        out.push_str(&format!("{:.16e}", sl.t));
        for v in &sl.tau1 {
            out.push_str(&format!(",{v:.16e}"));
        }
        out.push_str(&format!(",{:.16e}", sl.tau1_norm));
        for v in &sl.tau2 {
            out.push_str(&format!(",{v:.16e}"));
        }
        out.push_str(&format!(",{:.16e}\n", sl.tau2_norm));
    }
    out
}

/// Affine image x ↦ L·base(x) + shift of another immersion; used to exercise
/// the residue transformation laws.
pub struct AffineImage<'a> {
    pub base: &'a dyn Immersion,
    pub lin: DMatrix<f64>,
    pub shift: Vector,
}

impl<'a> AffineImage<'a> {
    pub fn translated(base: &'a dyn Immersion, shift: Vector) -> Self {
        let n = base.dim();
        AffineImage {
            base,
            lin: DMatrix::identity(n, n),
            shift,
        }
    }

    pub fn linear(base: &'a dyn Immersion, lin: DMatrix<f64>) -> Self {
        let n = base.dim();
        AffineImage {
            base,
            lin,
            shift: Vector::zeros(n),
        }
    }
}

fn mat_apply(m: &DMatrix<f64>, v: &Vector) -> Vector {
    let n = m.nrows();
    let mut out = Vector::zeros(n);
    for i in 0..n {
        for j in 0..v.dim() {
            out.0[i] += m[(i, j)] * v.0[j];
        }
    }
    out
}

impl Immersion for AffineImage<'_> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn analytic(&self) -> bool {
        self.base.analytic()
    }

    fn partial(&self, dt: u32, dh: u32, t: f64, th: f64) -> Option<Vector> {
        let base = self.base.partial(dt, dh, t, th)?;
        let mut out = mat_apply(&self.lin, &base);
        if dt == 0 && dh == 0 {
            out = out.add(&self.shift);
        }
        Some(out)
    }
}

/// Defects of the six residue transformation identities, evaluated at one
/// slice by re-sampling the transformed geometry from scratch.
#[derive(Debug, Clone, serde::Serialize)]
pub struct TransformSuite {
    /// τ₁ unchanged under translation.
    pub tau1_translation: f64,
    /// τ₁ scales by λ⁻¹ under f ↦ λf.
    pub tau1_scaling: f64,
    /// τ₁ rotates with the surface: τ₁(Rf) = R τ₁(f).
    pub tau1_rotation: f64,
    /// τ₂(f+v, S) = τ₂(f, S) + τ₁(f)·Sv.
    pub tau2_translation: f64,
    /// τ₂ invariant under scaling.
    pub tau2_scaling: f64,
    /// τ₂(Rf, S) = τ₂(f, R⁻¹SR).
    pub tau2_rotation: f64,
    pub max_defect: f64,
}

pub fn transformation_suite(
    base: &dyn Immersion,
    d: &CylinderDomain,
    t_slice: f64,
    lambda: f64,
    rot: &DMatrix<f64>,
    shift: &Vector,
    skew: &SkewMatrix,
) -> Result<TransformSuite> {
    let n = base.dim();
    let gf = sample_geometry(base, d)?;
    let gf_shift = sample_geometry(&AffineImage::translated(base, shift.clone()), d)?;
    let gf_scale = sample_geometry(
        &AffineImage::linear(base, DMatrix::identity(n, n) * lambda),
        d,
    )?;
    let gf_rot = sample_geometry(&AffineImage::linear(base, rot.clone()), d)?;

    let t1 = tau1_slice(&gf, t_slice)?;
    let tau1_translation = tau1_slice(&gf_shift, t_slice)?.sub(&t1).norm();
    let tau1_scaling = tau1_slice(&gf_scale, t_slice)?
        .sub(&t1.scale(1.0 / lambda))
        .norm();
    let tau1_rotation = tau1_slice(&gf_rot, t_slice)?
        .sub(&mat_apply(rot, &t1))
        .norm();

    let t2 = tau2_slice(&gf, t_slice, skew)?;
    let tau2_translation =
        (tau2_slice(&gf_shift, t_slice, skew)? - t2 - t1.dot(&skew.apply(shift))).abs();
    let tau2_scaling = (tau2_slice(&gf_scale, t_slice, skew)? - t2).abs();
    let conj = rot.transpose() * skew.as_matrix() * rot;
    let tau2_rotation = (tau2_slice(&gf_rot, t_slice, skew)?
        - tau2_slice(&gf, t_slice, &SkewMatrix::from_matrix(&conj))?)
    .abs();

    let max_defect = [
        tau1_translation,
        tau1_scaling,
        tau1_rotation,
        tau2_translation,
        tau2_scaling,
        tau2_rotation,
    ]
    .into_iter()
    .fold(0.0, f64::max);
    Ok(TransformSuite {
        tau1_translation,
        tau1_scaling,
        tau1_rotation,
        tau2_translation,
        tau2_scaling,
        tau2_rotation,
        max_defect,
    })
}

/// The limit functional 𝕃(S) = ⟨v₁, Se₁⟩ + ⟨v₂, Se₂⟩ with v₁, v₂ first
/// projected orthogonal to the frame plane span{e₁, e₂}.
pub fn l_functional(
    v1: &Vector,
    v2: &Vector,
    e1: &Vector,
    e2: &Vector,
    s: &SkewMatrix,
) -> f64 {
    let perp = |v: &Vector| {
        let mut out = v.clone();
        out.axpy(-v.dot(e1), e1);
        out.axpy(-v.dot(e2), e2);
        out
    };
    perp(v1).dot(&s.apply(e1)) + perp(v2).dot(&s.apply(e2))
}

/// ‖𝕃‖ over the orthonormal skew basis: √((|v₁|² + |v₂|²)/2).
pub fn l_norm(v1: &Vector, v2: &Vector) -> f64 {
    ((v1.dot(v1) + v2.dot(v2)) / 2.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{sampler_r3, RotationFamilyR3, SkewRotation};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dom() -> CylinderDomain {
        CylinderDomain::new(0.0, 3.0, 1.0, 1, 48, 128).unwrap()
    }

    #[test]
    fn residues_slice_independent_on_willmore_family() {
        let s = sampler_r3(&RotationFamilyR3::new(0.3)).unwrap();
        let gf = sample_geometry(&s, &dom()).unwrap();
        let report = residue_report(&gf, 4).unwrap();
        assert!(report.tau1_drift < 1e-9, "tau1 drift {}", report.tau1_drift);
        assert!(report.tau2_drift < 1e-9, "tau2 drift {}", report.tau2_drift);
        let csv = residues_csv(&report);
        assert!(csv.starts_with("t,tau1_0"));
        assert_eq!(csv.lines().count(), report.slices.len() + 1);
    }

    #[test]
    fn tau2_norm_rotation_invariant() {
        let s = sampler_r3(&RotationFamilyR3::new(0.25)).unwrap();
        let d = dom();
        let mut skew = nalgebra::DMatrix::zeros(3, 3);
        skew[(0, 1)] = 0.4;
        skew[(1, 0)] = -0.4;
        skew[(0, 2)] = -0.7;
        skew[(2, 0)] = 0.7;
        let rot = SkewRotation::new(skew).unwrap().exp(1.0);
        let rotated = AffineImage::linear(&s, rot);
        let gf = sample_geometry(&s, &d).unwrap();
        let gf_rot = sample_geometry(&rotated, &d).unwrap();
        let norm = |c: &[f64]| c.iter().map(|x| x * x).sum::<f64>().sqrt();
        let n0 = norm(&tau2_components(&gf, 1.5).unwrap());
        let n1 = norm(&tau2_components(&gf_rot, 1.5).unwrap());
        assert!((n0 - n1).abs() < 1e-10, "{n0} vs {n1}");
    }

    #[test]
    fn transformation_identities() {
        let s = sampler_r3(&RotationFamilyR3::new(0.2)).unwrap();
        let d = dom();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut skew_gen = nalgebra::DMatrix::zeros(3, 3);
        for i in 0..3 {
            for j in (i + 1)..3 {
                let x: f64 = rng.gen_range(-1.0..1.0);
                skew_gen[(i, j)] = x;
                skew_gen[(j, i)] = -x;
            }
        }
        let rot = SkewRotation::new(skew_gen).unwrap().exp(1.0);
        let shift = Vector(vec![0.3, -0.2, 0.5]);
        let mut sk = SkewMatrix::zeros(3);
        sk.set(0, 1, 0.6);
        sk.set(0, 2, -0.3);
        sk.set(1, 2, 0.9);
        let suite =
            transformation_suite(&s, &d, 1.5, 1.7, &rot, &shift, &sk).unwrap();
        assert!(suite.max_defect < 1e-8, "suite {suite:?}");
    }

    #[test]
    fn limit_functional_examples() {
        let e1 = Vector::basis(3, 0);
        let e2 = Vector::basis(3, 1);
        let v1 = Vector::basis(3, 2);
        let v2 = Vector::zeros(3);
        let s = SkewMatrix::unit_basis(3, 0, 2);
        // S e1 = −e3/√2 under (E_13−E_31)/√2, so 𝕃 = −1/√2.
        let val = l_functional(&v1, &v2, &e1, &e2, &s);
        assert!((val.abs() - 1.0 / 2.0f64.sqrt()).abs() < 1e-14, "{val}");
        assert!((l_norm(&v1, &v2) - 0.5f64.sqrt()).abs() < 1e-14);
        // Norm over the full basis matches the closed form.
        let mut acc = 0.0;
        for i in 0..3 {
            for j in (i + 1)..3 {
                let s = SkewMatrix::unit_basis(3, i, j);
                acc += l_functional(&v1, &v2, &e1, &e2, &s).powi(2);
            }
        }
        assert!((acc.sqrt() - l_norm(&v1, &v2)).abs() < 1e-14);
    }
}
