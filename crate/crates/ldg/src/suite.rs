//! The acceptance battery: every spec-level claim as a pinned, seeded check
//! with its tolerance. The integration test target and the CLI
//! `--paper-suite` flag both drive these runners.

use crate::analytic::{
    hedgehog_angles, AnalyticDirector, AngleDirector, BumpProfile, EscapeDirector,
    HelicalDirector, OffsetPolar, RadialDirector, RadialScalar, ScaledAzimuth,
};
use crate::audit::{self, CheckOutcome};
use crate::error::SolverError;
use crate::euler_ode::{euler_ode_exponents, EulerSolutionForm};
use crate::field::{QField, ScalarField};
use crate::fit::fit_order_parameter;
use crate::flow::{minimize_gradient_flow, FlowParams};
use crate::grid::{CartesianGrid, DiffGrid, SphericalGrid};
use crate::hedgehog::{l2_scaling_max_diff, solve_hedgehog, HedgehogProfile};
use crate::model::{psi, s_plus};
use crate::projection::{
    j_vector, separated_coefficients, st_grad_div_closed_form, Channel,
};
use crate::residual::{el_residual_anisotropic, m_decomposition_at, st_grad_div,
    extra_equation_residual_at};
use crate::tensor::{uniaxial_compose_unchecked, QTensor, Vec3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::time::Instant;

/// Outcome of one acceptance criterion.
#[derive(Debug, Clone, Serialize)]
pub struct CriterionOutcome {
    pub id: usize,
    pub name: String,
    pub passed: bool,
    pub elapsed_seconds: f64,
    pub checks: Vec<CheckOutcome>,
}

impl CriterionOutcome {
    fn collect(id: usize, name: &str, start: Instant, checks: Vec<CheckOutcome>) -> Self {
        CriterionOutcome {
            id,
            name: name.to_string(),
            passed: checks.iter().all(|c| c.passed),
            elapsed_seconds: start.elapsed().as_secs_f64(),
            checks,
        }
    }

    pub fn format_line(&self) -> String {
        let worst = self
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!(" [{}: {:.3e} vs {:.3e}]", c.name, c.measured, c.tolerance))
            .collect::<String>();
        format!(
            "criterion {:2} {:<28} {} ({:.2}s){}",
            self.id,
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.elapsed_seconds,
            worst
        )
    }
}

/// 1. Uniaxiality criterion: β̃(compose) < 1e-12·max(1, s⁶) and β̃ ≥ −1e-12·|Q|⁶
/// on 10⁴ random states each.
pub fn criterion_1(seed: u64) -> CriterionOutcome {
    let t0 = Instant::now();
    let checks = vec![
        audit::check_compose_uniaxiality(seed, 10_000),
        audit::check_biaxiality_nonnegative(seed, 10_000),
    ];
    CriterionOutcome::collect(1, "uniaxiality criterion", t0, checks)
}

/// 2. Bulk algebra: ψ(s₊(t), t) = 0 on 50 temperatures, bulk gradient vs
/// finite differences on 100 random states.
pub fn criterion_2(seed: u64) -> CriterionOutcome {
    let t0 = Instant::now();
    let mut worst = 0.0f64;
    for k in 0..50 {
        let t = -5.0 + (9.0 / 8.0 + 5.0) * k as f64 / 49.0;
        let sp = s_plus(t).expect("t <= 9/8 on this sweep");
        worst = worst.max(psi(sp, t).abs());
    }
    let checks = vec![
        CheckOutcome::under("psi_at_s_plus", worst, 1e-12),
        audit::check_bulk_gradient_fd(seed, 100),
    ];
    CriterionOutcome::collect(2, "bulk algebra", t0, checks)
}

/// 3. Basis-form and tensor-form EL residuals agree to 1e-12 on 20 random
/// smooth fields on a 24³ grid.
pub fn criterion_3(seed: u64) -> CriterionOutcome {
    let t0 = Instant::now();
    let checks = vec![audit::check_basis_vs_tensor_el(seed, 24, 20)];
    CriterionOutcome::collect(3, "basis consistency", t0, checks)
}

/// 4. M-decomposition: pairwise orthogonality and M1+M2+M3 = EL residual to
/// O(h²) on analytic test fields.
pub fn criterion_4(seed: u64) -> CriterionOutcome {
    let t0 = Instant::now();
    let mut checks = vec![audit::check_m_orthogonality(seed, 400)];

    // analytic M-sum against the discrete EL residual, refining at order 2
    let t = 0.4;
    let s = RadialScalar(BumpProfile { amp: 1.2 });
    let n = AngleDirector {
        f: OffsetPolar(0.25),
        g: ScaledAzimuth(1.0),
    };
    let err_of = |nodes: usize| -> f64 {
        let grid = CartesianGrid::new([0.45, 0.35, 0.4], [1.0, 1.0, 1.0], [nodes; 3])
            .expect("box");
        let q = QField::from_fn(grid.n, |i, j, k| {
            let x = grid.coord(i, j, k);
            uniaxial_compose_unchecked(
                crate::analytic::AnalyticScalar::value(&s, &x),
                &crate::analytic::AnalyticDirector::director(&n, &x),
            )
        });
        let el = crate::residual::el_residual_isotropic(&grid, &q, t);
        let mut worst = 0.0f64;
        for i in 1..nodes - 1 {
            for j in 1..nodes - 1 {
                for k in 1..nodes - 1 {
                    let x = grid.coord(i, j, k);
                    let (m1, m2, m3) = m_decomposition_at(&s, &n, t, &x);
                    let msum = QTensor::project_matrix(&(m1 + m2 + m3));
                    worst = worst.max((el.get(i, j, k) - msum).norm());
                }
            }
        }
        worst
    };
    let e1 = err_of(12);
    let e2 = err_of(24);
    let order = (e1 / e2).log2();
    checks.push(CheckOutcome::under(
        "m_sum_vs_discrete_el_order",
        (order - 2.0).abs(),
        0.5,
    ));
    checks.push(audit::check_m_sum_equals_el(seed, 200));
    CriterionOutcome::collect(4, "M-decomposition", t0, checks)
}

fn hedgehog_battery(t: f64, l2: f64, checks: &mut Vec<CheckOutcome>) -> Option<HedgehogProfile> {
    let tag = |s: &str| format!("{s}_l2_{l2}");
    let profile = match solve_hedgehog(t, l2, 20.0, 400) {
        Ok(p) => p,
        Err(e) => {
            checks.push(CheckOutcome::under(&format!("{} ({e})", tag("solve")), 1.0, 0.0));
            return None;
        }
    };
    checks.push(CheckOutcome::under(
        &tag("newton_iterations"),
        profile.newton_iterations as f64,
        15.0,
    ));
    let sp = s_plus(t).unwrap();
    checks.push(CheckOutcome::under(
        &tag("boundary_value"),
        (profile.s.last().unwrap() - sp).abs(),
        1e-9,
    ));
    checks.push(CheckOutcome::under(
        &tag("ode_residual"),
        profile.max_ode_residual,
        1e-10,
    ));
    checks.push(CheckOutcome::under(
        &tag("origin_exponent"),
        (profile.origin_exponent(2, 8) - 2.0).abs(),
        0.05,
    ));

    // full 5-component EL residual of the reconstructed field, order 2
    let (e1, o1) = el_residual_refinement(&profile, t, l2, 12);
    let _ = e1;
    checks.push(CheckOutcome::under(
        &tag("el_refinement_order_dev"),
        (o1 - 2.0).abs(),
        0.2,
    ));
    Some(profile)
}

/// Interior max of the discrete (an)isotropic EL residual of the
/// reconstructed hedgehog field on a Cartesian box at `n` and `2n` nodes;
/// returns (fine error, order).
fn el_residual_refinement(profile: &HedgehogProfile, t: f64, l2: f64, n: usize) -> (f64, f64) {
    let err_of = |nodes: usize| -> f64 {
        let grid =
            CartesianGrid::new([0.5, 0.4, 0.45], [1.2, 1.2, 1.2], [nodes; 3]).expect("box");
        let q = QField::from_fn(grid.n, |i, j, k| {
            let x = grid.coord(i, j, k);
            let r = x.norm();
            uniaxial_compose_unchecked(profile.eval(r), &(x / r))
        });
        let res = el_residual_anisotropic(&grid, &q, t, l2);
        let mut worst = 0.0f64;
        for i in 1..nodes - 1 {
            for j in 1..nodes - 1 {
                for k in 1..nodes - 1 {
                    worst = worst.max(res.get(i, j, k).norm());
                }
            }
        }
        worst
    };
    let e1 = err_of(n);
    let e2 = err_of(2 * n);
    (e2, (e1 / e2).log2())
}

/// 5. Isotropic hedgehog: Newton convergence, boundary value, origin
/// exponent, and order-2 EL-residual refinement at t = 1, L2 = 0.
pub fn criterion_5(_seed: u64) -> CriterionOutcome {
    let t0 = Instant::now();
    let mut checks = Vec::new();
    hedgehog_battery(1.0, 0.0, &mut checks);
    CriterionOutcome::collect(5, "hedgehog isotropic", t0, checks)
}

/// 6. Anisotropic hedgehog at L2 ∈ {−0.9, 1, 3}: same battery plus the
/// radial-rescaling law to 1e-5.
pub fn criterion_6(_seed: u64) -> CriterionOutcome {
    let t0 = Instant::now();
    let mut checks = Vec::new();
    for l2 in [-0.9, 1.0, 3.0] {
        hedgehog_battery(1.0, l2, &mut checks);
        let diff = l2_scaling_max_diff(0.0, l2, 20.0, 400).unwrap_or(f64::INFINITY);
        checks.push(CheckOutcome::under(
            &format!("scaling_law_l2_{l2}"),
            diff,
            1e-5,
        ));
    }
    CriterionOutcome::collect(6, "hedgehog anisotropic", t0, checks)
}

/// 7. Extra-equation audit: radial and escape analytic residuals < 1e-8,
/// helical classified inadmissible with residual > 0.1.
pub fn criterion_7(seed: u64) -> CriterionOutcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_radial = 0.0f64;
    let mut worst_escape = 0.0f64;
    let mut helical = 0.0f64;
    let escape = EscapeDirector::from_boundary(0.0);
    let hel = HelicalDirector { pitch: 1.0 };
    for _ in 0..64 {
        let x = Vec3::new(
            rng.gen_range(0.2..0.9),
            rng.gen_range(0.1..0.5),
            rng.gen_range(-0.8..0.8),
        );
        worst_radial = worst_radial.max(extra_equation_residual_at(&RadialDirector, &x).norm());
        worst_escape = worst_escape.max(extra_equation_residual_at(&escape, &x).norm());
        helical = helical.max(extra_equation_residual_at(&hel, &x).norm());
    }
    let checks = vec![
        CheckOutcome::under("radial_extra_eq", worst_radial, 1e-8),
        CheckOutcome::under("escape_extra_eq", worst_escape, 1e-8),
        CheckOutcome::over("helical_extra_eq_inadmissible", helical, 0.1),
    ];
    CriterionOutcome::collect(7, "extra-equation audit", t0, checks)
}

/// 8. Escape incompatibility: the escape fit has a normalized-residual floor
/// > 0.01 for every iterate, while the radial fit reaches machine-level
/// residual with the profile matching the radial BVP to 1e-3.
pub fn criterion_8(_seed: u64) -> CriterionOutcome {
    let t0 = Instant::now();
    let mut checks = Vec::new();
    let t = 1.0;
    let sp = s_plus(t).unwrap();

    let grid = CartesianGrid::new([0.15, 0.12, 0.0], [0.55, 0.45, 0.6], [16, 14, 14])
        .expect("escape box");
    let boundary = ScalarField::from_fn(grid.n, |_, _, _| sp);
    let escape = EscapeDirector::from_boundary(0.0);
    match fit_order_parameter(&grid, &escape, t, &boundary, &boundary, sp) {
        Ok(out) => {
            checks.push(CheckOutcome::over(
                "escape_residual_floor",
                out.min_iterate_residual,
                0.01,
            ));
        }
        Err(e) => checks.push(CheckOutcome::under(&format!("escape_fit ({e})"), 1.0, 0.0)),
    }

    let t = 0.0;
    let sp = s_plus(t).unwrap();
    let sphere = SphericalGrid::new(1.5, 4.5, 44, 10, 12).expect("fit shell");
    let boundary = ScalarField::from_fn(sphere.dims(), |_, _, _| sp);
    match fit_order_parameter(&sphere, &RadialDirector, t, &boundary, &boundary, sp) {
        Ok(out) => {
            checks.push(CheckOutcome::under(
                "radial_fit_residual",
                out.normalized_residual,
                1e-9,
            ));
            let bvp = crate::hedgehog::RadialBvp {
                t,
                l2: 0.0,
                r_inner: 1.5,
                r_outer: 4.5,
                inner_value: sp,
                outer_value: sp,
                nodes: 4001,
            };
            let oracle = crate::hedgehog::solve_radial_bvp(&bvp, |_| sp).unwrap();
            let mut worst = 0.0f64;
            for i in 0..sphere.nr {
                for j in 0..sphere.nphi {
                    for k in 0..sphere.ntheta {
                        worst = worst
                            .max((out.s.get(i, j, k) - oracle.eval(sphere.r(i))).abs());
                    }
                }
            }
            checks.push(CheckOutcome::under("radial_fit_profile", worst / sp, 1e-3));
        }
        Err(e) => checks.push(CheckOutcome::under(&format!("radial_fit ({e})"), 1.0, 0.0)),
    }
    CriterionOutcome::collect(8, "escape incompatibility", t0, checks)
}

/// 9. Appendix identity: closed-form vs finite-difference ST(Q_{ik,kj}) at
/// order 2 on two analytic families; J(s, n)·n < 1e-10.
pub fn criterion_9(seed: u64) -> CriterionOutcome {
    let t0 = Instant::now();
    let mut checks = Vec::new();
    let s = RadialScalar(BumpProfile { amp: 1.1 });

    fn family_order(
        s: &impl crate::analytic::AnalyticScalar,
        n: &impl crate::analytic::AnalyticDirector,
        label: &str,
        checks: &mut Vec<CheckOutcome>,
    ) {
        use crate::analytic::{AnalyticDirector, AnalyticScalar};
        let err_of = |nodes: usize| -> f64 {
            let grid = CartesianGrid::new([0.5, 0.35, 0.4], [1.1, 1.1, 1.1], [nodes; 3])
                .expect("box");
            let q = QField::from_fn(grid.n, |i, j, k| {
                let x = grid.coord(i, j, k);
                uniaxial_compose_unchecked(s.value(&x), &n.director(&x))
            });
            let fd = st_grad_div(&grid, &q);
            let mut worst = 0.0f64;
            for i in 1..nodes - 1 {
                for j in 1..nodes - 1 {
                    for k in 1..nodes - 1 {
                        let x = grid.coord(i, j, k);
                        let closed = st_grad_div_closed_form(s, n, &x);
                        worst = worst.max((fd.get(i, j, k) - closed).norm());
                    }
                }
            }
            worst
        };
        let e1 = err_of(12);
        let e2 = err_of(24);
        checks.push(CheckOutcome::under(
            &format!("appendix_fd_order_{label}"),
            ((e1 / e2).log2() - 2.0).abs(),
            0.5,
        ));
    }

    family_order(&s, &RadialDirector, "radial", &mut checks);
    let tilted = AngleDirector {
        f: OffsetPolar(0.3),
        g: ScaledAzimuth(1.0),
    };
    family_order(&s, &tilted, "tilted", &mut checks);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_j = 0.0f64;
    for _ in 0..100 {
        let x = Vec3::new(
            rng.gen_range(0.4..1.4),
            rng.gen_range(0.3..1.2),
            rng.gen_range(0.3..1.2),
        );
        let j = j_vector(&s, &tilted, &x);
        worst_j = worst_j.max(j.dot(&tilted.director(&x)).abs());
        let j = j_vector(&s, &RadialDirector, &x);
        worst_j = worst_j.max(j.dot(&RadialDirector.director(&x)).abs());
    }
    checks.push(CheckOutcome::under("j_dot_n", worst_j, 1e-10));
    let (a, b) = audit::check_appendix_identity(seed, 200);
    checks.push(a);
    checks.push(b);
    CriterionOutcome::collect(9, "appendix ST identity", t0, checks)
}

/// 10. Separated coefficients: A4 = A5 = 0 and A1 = 1 + (2/3)L2 for the
/// radial director; a tilted director forces |A4| > 1e-3; Euler-ODE
/// exponents of (1, 2, −6) are {2, −3} exactly.
pub fn criterion_10(_seed: u64) -> CriterionOutcome {
    let t0 = Instant::now();
    let mut checks = Vec::new();
    let mut worst_a45 = 0.0f64;
    let mut worst_a1 = 0.0f64;
    for l2 in [-0.9, 1.0, 3.0] {
        for (phi, theta) in [(0.7, 0.4), (1.4, 2.2), (2.3, 5.0)] {
            for ch in [Channel::K4, Channel::K5] {
                match separated_coefficients(&hedgehog_angles(), l2, phi, theta, ch) {
                    Ok(c) => worst_a45 = worst_a45.max(c.a.abs()),
                    Err(_) => worst_a45 = f64::INFINITY,
                }
            }
            match separated_coefficients(&hedgehog_angles(), l2, phi, theta, Channel::K1) {
                Ok(c) => worst_a1 = worst_a1.max((c.a - (1.0 + 2.0 / 3.0 * l2)).abs()),
                Err(_) => worst_a1 = f64::INFINITY,
            }
        }
    }
    checks.push(CheckOutcome::under("radial_a4_a5", worst_a45, 1e-10));
    checks.push(CheckOutcome::under("radial_a1_value", worst_a1, 1e-8));

    let tilted = AngleDirector {
        f: OffsetPolar(0.3),
        g: ScaledAzimuth(1.0),
    };
    let mut max_tilted = 0.0f64;
    for (phi, theta) in [(0.9, 0.0), (1.3, 1.2), (2.0, 3.9)] {
        for ch in [Channel::K4, Channel::K5] {
            if let Ok(c) = separated_coefficients(&tilted, 1.0, phi, theta, ch) {
                max_tilted = max_tilted.max(c.a.abs());
            }
        }
    }
    checks.push(CheckOutcome::over("tilted_a45_nonzero", max_tilted, 1e-3));

    let exact = matches!(
        euler_ode_exponents(1.0, 2.0, -6.0),
        Ok(EulerSolutionForm::DistinctReal { alpha1, alpha2 }) if alpha1 == 2.0 && alpha2 == -3.0
    );
    checks.push(CheckOutcome::under(
        "euler_exponents_exact",
        if exact { 0.0 } else { 1.0 },
        0.0,
    ));
    CriterionOutcome::collect(10, "separated coefficients", t0, checks)
}

/// Configuration of the shell-minimizer experiment (criterion 11).
#[derive(Debug, Clone, Copy)]
pub struct ShellExperiment {
    pub r_inner: f64,
    pub r_outer: f64,
    pub nr: usize,
    pub nphi: usize,
    pub ntheta: usize,
    pub t: f64,
    pub tolerance: f64,
    pub max_steps: usize,
}

impl Default for ShellExperiment {
    fn default() -> Self {
        ShellExperiment {
            r_inner: 1.25,
            r_outer: 7.0,
            nr: 48,
            nphi: 24,
            ntheta: 32,
            t: 0.0,
            tolerance: 5e-6,
            max_steps: 60_000,
        }
    }
}

/// Results of the shell-minimizer run, shared by the acceptance suite and
/// the CLI `minimize` command.
#[derive(Debug)]
pub struct ShellRun {
    pub flow: crate::flow::FlowState,
    pub oracle: HedgehogProfile,
    pub profile_rel_err: f64,
    pub energy_monotone: bool,
    pub grid: SphericalGrid,
}

/// Runs the radial-boundary shell minimization: Dirichlet data is the
/// hedgehog profile composed with x/|x|, so the continuum solution is the
/// hedgehog restricted to the shell and the decomposed s-profile compares
/// directly against `solve_hedgehog`.
pub fn run_shell_minimizer(cfg: &ShellExperiment) -> Result<ShellRun, SolverError> {
    let grid = SphericalGrid::new(cfg.r_inner, cfg.r_outer, cfg.nr, cfg.nphi, cfg.ntheta)?;
    let oracle = solve_hedgehog(cfg.t, 0.0, 20.0, 3201)?;
    let sp = s_plus(cfg.t).map_err(SolverError::Model)?;
    let radial = |s: f64, x: Vec3| uniaxial_compose_unchecked(s, &(x / x.norm()));
    let dims = [grid.nr, grid.nphi, grid.ntheta];
    let boundary = QField::from_fn(dims, |i, j, k| {
        radial(oracle.eval(grid.r(i)), grid.coord(i.max(1), j, k))
    });
    // start away from the solution: right asymptotics, wrong core scale
    let init = QField::from_fn(dims, |i, j, k| {
        let r = grid.r(i);
        radial(sp * r * r / (r * r + 4.0), grid.coord(i, j, k))
    });
    let params = FlowParams {
        t: cfg.t,
        l2: 0.0,
        tolerance: cfg.tolerance,
        max_steps: cfg.max_steps,
        ..Default::default()
    };
    let flow = minimize_gradient_flow(&grid, &init, &boundary, &params)?;
    let energy_monotone = flow
        .energy_trace
        .windows(2)
        .all(|w| w[1] <= w[0] + 1e-13 * w[0].abs().max(1.0));
    let mut worst = 0.0f64;
    for i in 0..grid.nr {
        for j in 0..grid.nphi {
            for k in 0..grid.ntheta {
                if let Ok(d) = crate::tensor::uniaxial_decompose(&flow.q.get(i, j, k), 1e-2) {
                    worst = worst.max((d.s - oracle.eval(grid.r(i))).abs());
                } else {
                    worst = f64::INFINITY;
                }
            }
        }
    }
    Ok(ShellRun {
        profile_rel_err: worst / sp,
        energy_monotone,
        flow,
        oracle,
        grid,
    })
}

/// 11. Shell minimizer: monotone energy, final max β̃ < 1e-6, decomposed
/// s-profile within 1e-3 of the hedgehog ODE.
pub fn criterion_11(_seed: u64) -> CriterionOutcome {
    let t0 = Instant::now();
    let mut checks = Vec::new();
    match run_shell_minimizer(&ShellExperiment::default()) {
        Ok(run) => {
            checks.push(CheckOutcome::under(
                "flow_converged",
                if run.flow.converged { 0.0 } else { 1.0 },
                0.0,
            ));
            checks.push(CheckOutcome::under(
                "energy_monotone",
                if run.energy_monotone { 0.0 } else { 1.0 },
                0.0,
            ));
            checks.push(CheckOutcome::under(
                "max_biaxiality",
                run.flow.max_biaxiality,
                1e-6,
            ));
            checks.push(CheckOutcome::under(
                "profile_rel_err",
                run.profile_rel_err,
                1e-3,
            ));
        }
        Err(e) => checks.push(CheckOutcome::under(&format!("shell_run ({e})"), 1.0, 0.0)),
    }
    CriterionOutcome::collect(11, "shell minimizer", t0, checks)
}

/// 12. eq_beta2 as an exact identity on random states, plus the t ≥ 0,
/// s ≥ 0 sign condition.
pub fn criterion_12(seed: u64) -> CriterionOutcome {
    let t0 = Instant::now();
    let (a, b) = audit::check_eq_beta2(seed, 1000);
    CriterionOutcome::collect(12, "subharmonicity identity", t0, vec![a, b])
}

/// Runs all twelve criteria with one seed.
pub fn run_all(seed: u64) -> Vec<CriterionOutcome> {
    vec![
        criterion_1(seed),
        criterion_2(seed),
        criterion_3(seed),
        criterion_4(seed),
        criterion_5(seed),
        criterion_6(seed),
        criterion_7(seed),
        criterion_8(seed),
        criterion_9(seed),
        criterion_10(seed),
        criterion_11(seed),
        criterion_12(seed),
    ]
}
