use ldg::field::QField;
use ldg::flow::{minimize_gradient_flow, FlowParams};
use ldg::grid::SphericalGrid;
use ldg::hedgehog::solve_hedgehog;
use ldg::model::s_plus;
use ldg::tensor::uniaxial_decompose;
use std::time::Instant;

fn main() {
    let t0 = Instant::now();
    let (r0, r1) = (1.25, 7.0);
    let grid = SphericalGrid::new(r0, r1, 48, 24, 32).unwrap();
    let t = 0.0;
    let sp = s_plus(t).unwrap();
    let hh = solve_hedgehog(t, 0.0, 20.0, 3201).unwrap();
    let radial = |s: f64, x: ldg::tensor::Vec3| ldg::tensor::uniaxial_compose_unchecked(s, &(x / x.norm()));
    let boundary = QField::from_fn([grid.nr, grid.nphi, grid.ntheta], |i, j, k| {
        radial(hh.eval(grid.r(i)), grid.coord(i.max(1), j, k))
    });
    let init = QField::from_fn([grid.nr, grid.nphi, grid.ntheta], |i, j, k| {
        let r = grid.r(i);
        radial(sp * r * r / (r * r + 1.0) * 1.05 - 0.05, grid.coord(i, j, k))
    });
    let params = FlowParams { t, l2: 0.0, tolerance: 5e-6, max_steps: 60000, ..Default::default() };
    let out = minimize_gradient_flow(&grid, &init, &boundary, &params).unwrap();
    println!("iters={} conv={} elapsed={:.0?}", out.iterations, out.converged, t0.elapsed());
    let mut worst = 0.0f64;
    for i in 0..grid.nr {
        for j in 0..grid.nphi {
            for k in 0..grid.ntheta {
                let d = uniaxial_decompose(&out.q.get(i, j, k), 1e-1).unwrap();
                worst = worst.max((d.s - hh.eval(grid.r(i))).abs());
            }
        }
    }
    println!("profile rel err (all rays) = {:.3e}", worst / sp);
    println!("beta raw = {:.3e}, normalized = {:.3e}", out.max_biaxiality, out.max_biaxiality_normalized);
    for j in [0usize, 1, 2, 3] {
        let mut biax = 0.0f64;
        let mut prof = 0.0f64;
        for i in 0..grid.nr { for k in 0..grid.ntheta {
            let q = out.q.get(i, j, k);
            biax = biax.max(q.biaxiality());
            let d = uniaxial_decompose(&q, 1e-1).unwrap();
            prof = prof.max((d.s - hh.eval(grid.r(i))).abs());
        }}
        println!("  j={j}: beta={:.2e} prof={:.2e}", biax, prof/sp);
    }
}
