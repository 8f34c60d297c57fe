//! End-to-end acceptance suite: eleven numbered criteria covering the
//! Willmore residual checks, the residue identities, the neck limit fields,
//! the global identities, and the three-circle experiments. Each criterion
//! prints one PASS/FAIL line; the test fails if any criterion fails.

use std::f64::consts::{PI, TAU};

use willmore::geometry::{
    sample_geometry, willmore_energy, willmore_residual, CylinderDomain, ResidualMode,
};
use willmore::model::{
    expansion_check_r3, fit_exponent, sampler_r3, sampler_r4, RotationFamilyR3,
    RotationFamilyR4, SkewRotation,
};
use willmore::neck::{analyze_family_neck, identity_checks, neck_context};
use willmore::residue::{residue_report, tau2_components, transformation_suite};
use willmore::spectral::{g_fluxes, pohozaev_defect, GridField};
use willmore::threecircle::{
    check_triple, classify_branch, harmonic_three_circle_experiment, triple_energies,
    BranchLabel, HarmonicSample, ThreeCircleParams,
};
use willmore::{SkewMatrix, Vector};

struct Scoreboard {
    rows: Vec<(usize, &'static str, bool, String)>,
}

impl Scoreboard {
    fn new() -> Self {
        Scoreboard { rows: Vec::new() }
    }

    fn record(&mut self, n: usize, what: &'static str, pass: bool, detail: String) {
        println!(
            "{} criterion {n}: {what} ({detail})",
            if pass { "PASS" } else { "FAIL" }
        );
        self.rows.push((n, what, pass, detail));
    }

    fn finish(self) {
        let failed: Vec<_> = self.rows.iter().filter(|r| !r.2).collect();
        assert!(failed.is_empty(), "failed criteria: {failed:?}");
    }
}

fn tau2_norm_at(gf: &willmore::geometry::GeometryField, t: f64) -> f64 {
    tau2_components(gf, t)
        .unwrap()
        .iter()
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
}

#[test]
fn acceptance() {
    let mut sb = Scoreboard::new();
    let d3 = CylinderDomain::new(0.0, 3.0, 1.0, 1, 48, 64).unwrap();

    // 1: scalar Willmore residual of the R^3 family.
    {
        let mut worst = 0.0f64;
        for l in [1.0, 0.1] {
            let s = sampler_r3(&RotationFamilyR3::new(l)).unwrap();
            let r = willmore_residual(&s, &d3, ResidualMode::Scalar).unwrap();
            worst = worst.max(r.max_norm);
        }
        sb.record(1, "scalar residual <= 1e-6", worst <= 1e-6, format!("max {worst:.2e}"));
    }

    // 2: invariant-form residual of the R^4 family.
    {
        let mut worst = 0.0f64;
        for (a, b, c, d) in [(0.2, 0.05, -0.1, 0.3), (0.2, 0.0, 0.0, 0.2)] {
            let s = sampler_r4(&RotationFamilyR4 { a, b, c, d, m: 1 }).unwrap();
            let r = willmore_residual(&s, &d3, ResidualMode::Invariant).unwrap();
            worst = worst.max(r.max_norm);
        }
        sb.record(2, "R^4 invariant residual <= 1e-5", worst <= 1e-5, format!("max {worst:.2e}"));
    }

    // 3: neck energy and scale at k = 100, L = 1.
    {
        let k = 100.0;
        let s = sampler_r3(&RotationFamilyR3::new(1.0 / k)).unwrap();
        let gf = sample_geometry(&s, &d3).unwrap();
        let w1 = willmore_energy(&gf, 1).unwrap();
        let ctx = neck_context(&s, 2, 1.0, 1, 64, 64).unwrap();
        let dw = (w1 * k * k / (4.0 * PI) - 1.0).abs();
        let de = (ctx.eps * k / 2.0 - 1.0).abs();
        sb.record(
            3,
            "W(Q)k^2 -> 4*pi*L and eps*k -> 2 within 2%",
            dw <= 0.02 && de <= 0.02,
            format!("rel dev {dw:.3e}, {de:.3e}"),
        );
    }

    // 4: second residue magnitude at k = 100.
    {
        let k = 100.0;
        let s = sampler_r3(&RotationFamilyR3::new(1.0 / k)).unwrap();
        let gf = sample_geometry(&s, &d3).unwrap();
        let tau2 = tau2_norm_at(&gf, 1.5);
        let w1 = willmore_energy(&gf, 1).unwrap();
        let d1 = (tau2 * k / (4.0 * 2.0f64.sqrt() * PI) - 1.0).abs();
        let d2 = (tau2 / w1.sqrt() / (2.0 * TAU.sqrt()) - 1.0).abs();
        sb.record(
            4,
            "tau2*k -> 4*sqrt(2)*pi and tau2/sqrt(W(Q)) -> 2*sqrt(2*pi/L) within 5%",
            d1 <= 0.05 && d2 <= 0.05,
            format!("rel dev {d1:.3e}, {d2:.3e}"),
        );
    }

    // 5: residue transformation identities, and slice drift shrinking in k.
    {
        let s = sampler_r3(&RotationFamilyR3::new(0.2)).unwrap();
        let mut gen = nalgebra::DMatrix::zeros(3, 3);
        gen[(0, 1)] = 0.5;
        gen[(1, 0)] = -0.5;
        gen[(1, 2)] = -0.9;
        gen[(2, 1)] = 0.9;
        let rot = SkewRotation::new(gen).unwrap().exp(1.0);
        let shift = Vector(vec![0.4, -0.1, 0.8]);
        let mut sk = SkewMatrix::zeros(3);
        sk.set(0, 1, 0.6);
        sk.set(0, 2, -0.3);
        sk.set(1, 2, 0.9);
        let suite = transformation_suite(&s, &d3, 1.5, 1.7, &rot, &shift, &sk).unwrap();

        let drift = |k: f64| {
            let s = sampler_r3(&RotationFamilyR3::new(1.0 / k)).unwrap();
            let gf = sample_geometry(&s, &d3).unwrap();
            let rep = residue_report(&gf, 4).unwrap();
            rep.tau1_drift.max(rep.tau2_drift)
        };
        let (d100, d200) = (drift(100.0), drift(200.0));
        // The residues of the exact family are conserved at every k, so the
        // drift is pure roundoff; below the 1e-12 floor the decrease in k is
        // unobservable and the floor itself is accepted.
        let drift_ok = d200 <= 0.7 * d100 || (d100 <= 1e-12 && d200 <= 1e-12);
        sb.record(
            5,
            "transformation identities <= 1e-8 and drift(200) <= 0.7*drift(100)",
            suite.max_defect <= 1e-8 && drift_ok,
            format!("defect {:.2e}, drift {d100:.2e} -> {d200:.2e}", suite.max_defect),
        );
    }

    // 6 and 7: global identities over [0, k] at L = 1.
    {
        let rows = identity_checks(&[50.0, 100.0], |k| k, 1.0, 8, 64, 2).unwrap();
        let (r50, r100) = (&rows[0], &rows[1]);
        sb.record(
            6,
            "energy identity gap <= 5% (k=50) and <= 3% (k=100)",
            r50.gap_energy <= 0.05 && r100.gap_energy <= 0.03,
            format!("gaps {:.3e}, {:.3e}", r50.gap_energy, r100.gap_energy),
        );
        // The Gauss-map curve of the exact family is a great circle, so the
        // geodesic defect is roundoff; below 1e-8 the trend in k is noise.
        let defect_ok = r100.mean_defect < r50.mean_defect
            || (r50.mean_defect <= 1e-8 && r100.mean_defect <= 1e-8);
        sb.record(
            7,
            "length identity gap <= 5%, geodesic defect <= 0.1 and decreasing",
            r50.gap_length <= 0.05
                && r100.gap_length <= 0.05
                && r50.mean_defect <= 0.1
                && defect_ok,
            format!(
                "length gaps {:.3e}, {:.3e}; defects {:.3e} -> {:.3e}",
                r50.gap_length, r100.gap_length, r50.mean_defect, r100.mean_defect
            ),
        );
    }

    // 8 and 9: first- and second-order limit fields at the neck.
    {
        let e100 = analyze_family_neck(100.0, 1.0, 64, 64).unwrap();
        let e200 = analyze_family_neck(200.0, 1.0, 64, 64).unwrap();
        let sup = e200.first.max_field_residual();
        sb.record(
            8,
            "first-order sup residuals <= 0.05 and scalar speed in [0.45, 0.55] at k=200",
            sup <= 0.05 && e200.first.scalar_speed >= 0.45 && e200.first.scalar_speed <= 0.55,
            format!("sup {sup:.3e}, speed {:.3}", e200.first.scalar_speed),
        );
        sb.record(
            9,
            "second-order span <= 0.1 at k=200 and position residual decreasing",
            e200.second.span <= 0.1 && e200.second.position < e100.second.position,
            format!(
                "span {:.3e}, position {:.3e} -> {:.3e}",
                e200.second.span, e100.second.position, e200.second.position
            ),
        );
    }

    // 10: three-circle experiment on harmonic samples.
    {
        let exp = harmonic_three_circle_experiment(1, 1.0, 5.0, 8, 200, 42).unwrap();
        let params = ThreeCircleParams::new(1, 1.0, 5.0).unwrap();
        // The growing excluded mode e^{mt} cos(m theta) must fail.
        let bad = HarmonicSample::new(0.0, 0.0, vec![1.0], vec![0.0], vec![0.0], vec![0.0], None)
            .unwrap();
        let [p1, p2, p3] = triple_energies(&bad, 1, 5.0);
        let bad_fails = !check_triple(p1, p2, p3, &params).unwrap();
        // Closed-form energies against direct quadrature.
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(5);
        let u = HarmonicSample::random(4, Some(1), &mut rng);
        let oracle = u.weighted_energy(1, 0.0, 2.0);
        let (nt, nth) = (2400usize, 64usize);
        let ht = 2.0 / nt as f64;
        let mut line = Vec::with_capacity(nt + 1);
        for i in 0..=nt {
            let t = i as f64 * ht;
            let mut acc = 0.0;
            for j in 0..nth {
                let th = TAU * j as f64 / nth as f64;
                let v = u.eval(t, th);
                acc += v * v;
            }
            line.push(acc * TAU / nth as f64 * (-2.0 * t).exp());
        }
        let mut quad = line[0] + line[nt];
        for (i, v) in line.iter().enumerate().take(nt).skip(1) {
            quad += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
        }
        quad *= ht / 3.0;
        let rel = (oracle - quad).abs() / oracle.abs();
        sb.record(
            10,
            "200/200 harmonic samples pass, growing mode fails, oracle matches quadrature",
            exp.pass_rate == 1.0 && bad_fails && rel <= 1e-10,
            format!("pass rate {}, oracle rel {rel:.2e}", exp.pass_rate),
        );
    }

    // 11: analytic property checks: Pohozaev flux, branch dichotomy,
    // expansion orders, and the finite-difference order itself.
    {
        let sigma = 1.7;
        let dp = CylinderDomain::new(0.0, 2.0, 1.0, 1, 512, 64).unwrap();
        let u = GridField::from_fn(&dp, 1, |t, th| vec![(sigma * t).exp() * th.cos()]);
        let lap = GridField::from_fn(&dp, 1, |t, th| {
            vec![(sigma * sigma - 1.0) * (sigma * t).exp() * th.cos()]
        });
        let poh = pohozaev_defect(&u, &lap, 0.25, 1.75).unwrap();

        let params = ThreeCircleParams::new(1, 1.0, 5.0).unwrap();
        let valley: Vec<f64> = (-3i32..=3)
            .map(|i| (params.q * params.seg_len * f64::from(i.abs())).exp())
            .collect();
        // Labels cover interior indices only (5 for the 7-entry valley).
        let labels = classify_branch(&valley, &params).unwrap();
        let branch_ok = labels[0] == BranchLabel::Left && labels[4] == BranchLabel::Right;

        let exp_report = expansion_check_r3(&[20.0, 40.0, 80.0], 1.0, 16, 64).unwrap();
        let orders_ok = exp_report.rows.iter().all(|r| r.pass);

        // Fitted order of the slice flux derivative (4th-order stencils).
        let flux_err = |nt: usize| {
            let d = CylinderDomain::new(0.0, 1.0, 1.0, 1, nt, 64).unwrap();
            let f = GridField::from_fn(&d, 1, |t, th| vec![t.exp() * th.cos()]);
            let fl = g_fluxes(&f);
            (0..d.t_nodes())
                .map(|it| (fl.gplus[it].c.0[0] - 2.0 * d.t_node(it).exp()).abs())
                .fold(0.0f64, f64::max)
        };
        let ns = [16.0, 32.0, 64.0];
        let errs: Vec<f64> = ns.iter().map(|&n| flux_err(n as usize)).collect();
        let order = fit_exponent(&ns, &errs);

        sb.record(
            11,
            "Pohozaev <= 1e-8, branch dichotomy, expansion orders, FD order >= 3.5",
            poh <= 1e-8 && branch_ok && orders_ok && order >= 3.5,
            format!("pohozaev {poh:.2e}, fd order {order:.2}"),
        );
    }

    sb.finish();
}
