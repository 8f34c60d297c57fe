//! Second-order bivariate jet arithmetic.
//!
//! A `Jet2` carries a value together with its first and second partial
//! derivatives in the two cylinder coordinates (t, θ). Propagating jets
//! through the algebra that builds metric, second fundamental form and mean
//! curvature yields analytic first and second derivatives of those derived
//! quantities, which is what the fourth-order Willmore residual needs;
//! nested finite differences would drown the 1e-6 residual targets in noise.
//!
//! Coefficients are raw partial derivatives, not Taylor coefficients, so the
//! product rule carries the binomial factor explicitly.

/// Value with partials up to total order two in (t, θ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet2 {
    pub v: f64,
    pub dt: f64,
    pub dh: f64,
    pub dtt: f64,
    pub dth: f64,
    pub dhh: f64,
}

impl Jet2 {
    pub const fn constant(v: f64) -> Self {
        Jet2 {
            v,
            dt: 0.0,
            dh: 0.0,
            dtt: 0.0,
            dth: 0.0,
            dhh: 0.0,
        }
    }

    pub const fn new(v: f64, dt: f64, dh: f64, dtt: f64, dth: f64, dhh: f64) -> Self {
        Jet2 {
            v,
            dt,
            dh,
            dtt,
            dth,
            dhh,
        }
    }

    /// Jet of ∂_t(self), valid to first order (second-order entries unknown,
    /// set to zero; callers must not read them).
    pub fn dt_jet(self) -> Jet2 {
        Jet2::new(self.dt, self.dtt, self.dth, 0.0, 0.0, 0.0)
    }

    /// Jet of ∂_θ(self), valid to first order.
    pub fn dh_jet(self) -> Jet2 {
        Jet2::new(self.dh, self.dth, self.dhh, 0.0, 0.0, 0.0)
    }

    pub fn mul(self, o: Jet2) -> Jet2 {
        Jet2 {
            v: self.v * o.v,
            dt: self.dt * o.v + self.v * o.dt,
            dh: self.dh * o.v + self.v * o.dh,
            dtt: self.dtt * o.v + 2.0 * self.dt * o.dt + self.v * o.dtt,
            dth: self.dth * o.v + self.dt * o.dh + self.dh * o.dt + self.v * o.dth,
            dhh: self.dhh * o.v + 2.0 * self.dh * o.dh + self.v * o.dhh,
        }
    }

    pub fn recip(self) -> Jet2 {
        let r = 1.0 / self.v;
        let r2 = r * r;
        let r3 = r2 * r;
        Jet2 {
            v: r,
            dt: -self.dt * r2,
            dh: -self.dh * r2,
            dtt: 2.0 * self.dt * self.dt * r3 - self.dtt * r2,
            dth: 2.0 * self.dt * self.dh * r3 - self.dth * r2,
            dhh: 2.0 * self.dh * self.dh * r3 - self.dhh * r2,
        }
    }

    pub fn div(self, o: Jet2) -> Jet2 {
        self.mul(o.recip())
    }

    pub fn sqrt(self) -> Jet2 {
        let s = self.v.sqrt();
        let st = self.dt / (2.0 * s);
        let sh = self.dh / (2.0 * s);
        Jet2 {
            v: s,
            dt: st,
            dh: sh,
            dtt: (self.dtt - 2.0 * st * st) / (2.0 * s),
            dth: (self.dth - 2.0 * st * sh) / (2.0 * s),
            dhh: (self.dhh - 2.0 * sh * sh) / (2.0 * s),
        }
    }

    pub fn scale(self, c: f64) -> Jet2 {
        Jet2 {
            v: c * self.v,
            dt: c * self.dt,
            dh: c * self.dh,
            dtt: c * self.dtt,
            dth: c * self.dth,
            dhh: c * self.dhh,
        }
    }
}

impl std::ops::Add for Jet2 {
    type Output = Jet2;
    fn add(self, o: Jet2) -> Jet2 {
        Jet2 {
            v: self.v + o.v,
            dt: self.dt + o.dt,
            dh: self.dh + o.dh,
            dtt: self.dtt + o.dtt,
            dth: self.dth + o.dth,
            dhh: self.dhh + o.dhh,
        }
    }
}

impl std::ops::Sub for Jet2 {
    type Output = Jet2;
    fn sub(self, o: Jet2) -> Jet2 {
        Jet2 {
            v: self.v - o.v,
            dt: self.dt - o.dt,
            dh: self.dh - o.dh,
            dtt: self.dtt - o.dtt,
            dth: self.dth - o.dth,
            dhh: self.dhh - o.dhh,
        }
    }
}

impl std::ops::Neg for Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        self.scale(-1.0)
    }
}

/// Vector of jets, one per ambient component.
pub type JetVec = Vec<Jet2>;

pub fn jet_dot(a: &[Jet2], b: &[Jet2]) -> Jet2 {
    let mut acc = Jet2::constant(0.0);
    for (x, y) in a.iter().zip(b) {
        acc = acc + x.mul(*y);
    }
    acc
}

pub fn jet_axpy(target: &mut JetVec, s: Jet2, src: &[Jet2]) {
    for (t, x) in target.iter_mut().zip(src) {
        *t = *t + s.mul(*x);
    }
}

pub fn jet_scale(v: &[Jet2], s: Jet2) -> JetVec {
    v.iter().map(|x| s.mul(*x)).collect()
}

pub fn jet_sub(a: &[Jet2], b: &[Jet2]) -> JetVec {
    a.iter().zip(b).map(|(x, y)| *x - *y).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    // Jet of f(t,θ) = e^{at} cos(bθ) at a point, from closed forms.
    fn exp_cos(a: f64, b: f64, t: f64, h: f64) -> Jet2 {
        let e = (a * t).exp();
        Jet2::new(
            e * (b * h).cos(),
            a * e * (b * h).cos(),
            -b * e * (b * h).sin(),
            a * a * e * (b * h).cos(),
            -a * b * e * (b * h).sin(),
            -b * b * e * (b * h).cos(),
        )
    }

    fn assert_jet_close(a: Jet2, b: Jet2, tol: f64) {
        for (x, y) in [
            (a.v, b.v),
            (a.dt, b.dt),
            (a.dh, b.dh),
            (a.dtt, b.dtt),
            (a.dth, b.dth),
            (a.dhh, b.dhh),
        ] {
            assert!((x - y).abs() < tol, "{x} vs {y}");
        }
    }

    #[test]
    fn product_matches_closed_form() {
        // e^{t}cos(θ) · e^{2t}cos(3θ) has closed-form partials via the
        // product rule; check the jet algebra reproduces them.
        let (t, h) = (0.3, 0.7);
        let f = exp_cos(1.0, 1.0, t, h);
        let g = exp_cos(2.0, 3.0, t, h);
        let p = f.mul(g);
        let e = (3.0 * t).exp();
        let (c1, s1) = (h.cos(), h.sin());
        let (c3, s3) = ((3.0 * h).cos(), (3.0 * h).sin());
        let v = e * c1 * c3;
        let dh = e * (-s1 * c3 - 3.0 * c1 * s3);
        let dhh = e * (-c1 * c3 + 3.0 * s1 * s3 + 3.0 * (s1 * s3 - 3.0 * c1 * c3));
        let expect = Jet2::new(v, 3.0 * v, dh, 9.0 * v, 3.0 * dh, dhh);
        assert_jet_close(p, expect, 1e-12);
    }

    #[test]
    fn recip_and_sqrt_roundtrip() {
        let (t, h) = (0.2, 1.1);
        let f = exp_cos(0.5, 2.0, t, h) + Jet2::constant(3.0);
        assert_jet_close(f.recip().recip(), f, 1e-12);
        assert_jet_close(f.sqrt().mul(f.sqrt()), f, 1e-12);
        assert_jet_close(f.div(f), Jet2::constant(1.0), 1e-13);
    }

    #[test]
    fn derivative_extraction() {
        let f = exp_cos(2.0, 3.0, 0.1, 0.4);
        let ft = f.dt_jet();
        assert_eq!(ft.v, f.dt);
        assert_eq!(ft.dt, f.dtt);
        assert_eq!(ft.dh, f.dth);
    }
}
