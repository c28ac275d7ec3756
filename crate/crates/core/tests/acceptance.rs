//! Reproduction criteria against reference error tables. Prints one PASS/FAIL
//! line per criterion, with the offending entries underneath, and exits
//! non-zero if any criterion fails. `LLPROJ_QUICK=1` stops the 3-D ladder
//! at k = 1/128.

#![allow(clippy::needless_range_loop)]

mod common;

use std::time::Instant;

use common::*;
use llproj::harness::{self, ConvergenceTable, LadderEntry, Mode, ReferenceKind, StudyConfig};
use llproj::ops::{self, GridInner};
use llproj::scheme::{self, Observer};
use llproj::{
    vec3, Control, Field, Grid, ManufacturedSolution, Params, SolverConfig, SolverMethod,
};

struct Verdict {
    ok: bool,
    summary: String,
    failures: Vec<String>,
}

impl Verdict {
    fn new() -> Self {
        Self {
            ok: true,
            summary: String::new(),
            failures: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.ok = false;
            self.failures.push(what());
        }
    }

    fn within(&mut self, label: &str, got: f64, want: f64, rel: f64) {
        let err = (got - want).abs() / want.abs();
        self.check(err <= rel, || {
            format!("{label}: {got:.4e} vs {want:.4e} ({:.1}% off)", 100.0 * err)
        });
    }
}

const NORMS: [&str; 3] = ["inf", "l2", "H1"];

fn compare_table(v: &mut Verdict, table: &ConvergenceTable, expected: &[(f64, [f64; 3])], rel: f64) {
    for &(k, want) in expected {
        let Some(row) = table.rows().iter().find(|r| (r.k - k).abs() <= 1e-12 * k) else {
            continue;
        };
        for (n, (got, want)) in row.errors().into_iter().zip(want).enumerate() {
            v.within(&format!("k = {k:e} {}", NORMS[n]), got, want, rel);
        }
    }
}

fn compare_orders(v: &mut Verdict, table: &ConvergenceTable, want: [f64; 3], tol: f64) -> [f64; 3] {
    let got = table.orders().expect("at least two rows");
    for n in 0..3 {
        v.check((got[n] - want[n]).abs() <= tol, || {
            format!(
                "order {}: {:.3} vs {:.3} (tolerance {tol})",
                NORMS[n], got[n], want[n]
            )
        });
    }
    got
}

fn a1() -> Verdict {
    let mut v = Verdict::new();
    let table = harness::converge_mms(&StudyConfig::preset(Mode::Mms1d)).unwrap();
    let expected = [
        (5e-3, [3.867e-5, 4.115e-5, 1.729e-4]),
        (2.5e-3, [7.976e-6, 1.053e-5, 4.629e-5]),
        (1.25e-3, [2.135e-6, 2.648e-6, 1.177e-5]),
        (6.25e-4, [5.765e-7, 6.627e-7, 2.949e-6]),
        (3.125e-4, [1.447e-7, 1.657e-7, 7.370e-7]),
    ];
    compare_table(&mut v, &table, &expected, 0.05);
    let o = compare_orders(&mut v, &table, [1.991, 1.990, 1.972], 0.05);
    v.summary = format!("1-D MMS k = h, orders {:.3} {:.3} {:.3}", o[0], o[1], o[2]);
    v
}

fn a2() -> Verdict {
    let mut v = Verdict::new();
    let table = harness::stability_table(&StudyConfig::preset(Mode::Stability1d)).unwrap();
    let steps = [2e-1, 1e-1, 5e-2, 2.5e-2, 1.25e-2, 6.25e-3];
    let spacings = [0.1, 0.05, 0.025, 0.0125];
    let expected = [
        [2.318e-2, 2.106e-2, 2.056e-2, 2.046e-2],
        [1.015e-2, 7.571e-3, 6.928e-3, 6.768e-3],
        [5.503e-3, 2.807e-3, 2.134e-3, 1.966e-3],
        [4.166e-3, 1.436e-3, 7.521e-4, 5.811e-4],
        [3.783e-3, 1.062e-3, 3.913e-4, 2.234e-4],
        [3.709e-3, 9.714e-4, 2.831e-4, 1.108e-4],
    ];
    let mut runs = 0;
    for (i, &k) in steps.iter().enumerate() {
        for (j, &h) in spacings.iter().enumerate() {
            match table.get(k, h) {
                Some(e) if e.is_finite() => {
                    runs += 1;
                    v.within(&format!("k = {k:e}, h = {h:e}"), e, expected[i][j], 0.10);
                }
                _ => v.check(false, || format!("k = {k:e}, h = {h:e}: no finite result")),
            }
        }
    }
    v.summary = format!("1-D stability grid, {runs}/24 finite runs");
    v
}

fn a3_a4() -> (Verdict, Verdict, f64) {
    let quick = std::env::var("LLPROJ_QUICK").is_ok_and(|s| s.trim() == "1");
    let mut cfg = StudyConfig::preset(Mode::Mms3d);
    if quick {
        cfg = cfg.quick();
    }
    let start = Instant::now();
    let table = harness::converge_mms(&cfg).unwrap();
    let secs = start.elapsed().as_secs_f64();

    let mut v = Verdict::new();
    let expected = [
        (1.0 / 16.0, [1.685e-3, 1.098e-3, 1.211e-3]),
        (1.0 / 32.0, [4.411e-4, 2.964e-4, 3.082e-4]),
        (1.0 / 64.0, [1.128e-4, 7.730e-5, 7.772e-5]),
        (1.0 / 128.0, [2.966e-5, 2.024e-5, 2.051e-5]),
        (1.0 / 256.0, [8.311e-6, 5.693e-6, 5.812e-6]),
    ];
    compare_table(&mut v, &table, &expected, 0.10);
    let o = compare_orders(&mut v, &table, [1.922, 1.906, 1.932], 0.1);
    let ladder = if quick { "quick" } else { "full" };
    v.summary = format!(
        "3-D h = 1/32 temporal ladder ({ladder}, {secs:.0} s), orders {:.3} {:.3} {:.3}",
        o[0], o[1], o[2]
    );

    let mut w = Verdict::new();
    let mut spot = StudyConfig::preset(Mode::Stability3d);
    spot.ladder = vec![LadderEntry::new(0.25, Grid::cube(32).unwrap())];
    let coarse = harness::stability_table(&spot)
        .unwrap()
        .get(0.25, 1.0 / 32.0)
        .unwrap();
    w.within("k = 1/4, h = 1/32", coarse, 1.421e-2, 0.10);
    let fine = table
        .rows()
        .iter()
        .find(|r| r.k == 1.0 / 128.0)
        .unwrap()
        .err_inf;
    w.within("k = 1/128, h = 1/32", fine, 2.966e-5, 0.10);
    w.summary = format!("3-D spot checks {coarse:.4e}, {fine:.4e}");
    (v, w, secs)
}

fn a5() -> Verdict {
    let mut v = Verdict::new();
    let mut parts = Vec::new();
    for kind in [ReferenceKind::Temporal, ReferenceKind::Spatial] {
        let cfg = StudyConfig::preset(Mode::Reference1d).with_reference_kind(kind);
        let o = harness::converge_reference(&cfg).unwrap().orders().unwrap();
        for n in 0..3 {
            v.check((1.85..=2.15).contains(&o[n]), || {
                format!("{kind:?} order {}: {:.3}", NORMS[n], o[n])
            });
        }
        parts.push(format!("{kind:?} {:.3} {:.3} {:.3}", o[0], o[1], o[2]));
    }
    v.summary = format!("1-D self-convergence orders: {}", parts.join("; "));
    v
}

fn a6() -> Verdict {
    let mut v = Verdict::new();
    let start = Instant::now();
    let mut r = rng(2024);

    for _ in 0..50 {
        let g = random_grid(&mut r);
        let f = random_field(g, &mut r);
        let q = random_field(g, &mut r);
        let lap = ops::laplacian(&f).unwrap();
        let lhs = -lap.inner(&q).unwrap();
        let (gf, gq) = (ops::gradient(&f), ops::gradient(&q));
        let rhs = gf.inner(&gq).unwrap();
        let scale = (gf.inner(&gf).unwrap() * gq.inner(&gq).unwrap()).sqrt()
            + ops::norm_l2(&lap) * ops::norm_l2(&q);
        v.check((lhs - rhs).abs() <= 1e-12 * scale, || {
            format!("summation by parts: {lhs:e} vs {rhs:e}")
        });

        let hq = ops::cross_fields(&f, &q).unwrap();
        let hhq = ops::triple_fields(&f, &q).unwrap();
        let s2 = ops::norm_l2(&f).powi(2) * ops::norm_l2(&q).powi(2) + ops::norm_l2(&q).powi(2);
        let orth = hq.inner(&q).unwrap();
        v.check(orth.abs() <= 1e-12 * s2, || {
            format!("<h x q, q> = {orth:e}")
        });
        let diss = hhq.inner(&q).unwrap() + hq.inner(&hq).unwrap();
        v.check(diss.abs() <= 1e-12 * s2, || {
            format!("<h x (h x q), q> + |h x q|^2 = {diss:e}")
        });

        let gfq = ops::gradient(&hq);
        for a in g.active_axes() {
            for (i, j, k) in g.interior() {
                let mut up = [i, j, k];
                if up[a] == g.cells()[a] {
                    continue;
                }
                up[a] += 1;
                let expand = vec3::add(
                    vec3::cross(gf.at(a, i, j, k), q.get(up[0], up[1], up[2])),
                    vec3::cross(f.get(i, j, k), gq.at(a, i, j, k)),
                );
                let d = vec3::max_abs(vec3::sub(gfq.at(a, i, j, k), expand));
                v.check(d <= 1e-13 * 4.0 / g.spacing()[a], || {
                    format!("product rule off by {d:e}")
                });
            }
        }

        let p = ops::project(&f.map_interior(|x| vec3::add(x, [0.0, 2.0, 0.0])).unwrap()).unwrap();
        let pp = ops::project(&p).unwrap();
        for c in 0..g.n_cells() {
            let unit = (vec3::norm(p.cell(c)) - 1.0).abs();
            let idem = vec3::max_abs(vec3::sub(p.cell(c), pp.cell(c)));
            v.check(unit <= 1e-14 && idem <= 1e-14, || {
                format!("projection: {unit:e}, {idem:e}")
            });
        }
    }

    let line = Grid::line(16).unwrap();
    let params = Params::new(0.01, 0.01, 1.0);
    let fixed = scheme::run(&Field::constant(line, [0.0, 0.0, 1.0]), &params, &mut []).unwrap();
    v.check(
        fixed.step() == 100
            && fixed
                .current()
                .interior_values()
                .iter()
                .all(|m| *m == [0.0, 0.0, 1.0]),
        || "constant field moved".into(),
    );

    for grid in [Grid::line(50).unwrap(), Grid::cube(6).unwrap()] {
        let sol = ManufacturedSolution::for_dim(grid.dim()).unwrap();
        let m0 = Field::from_fn(grid, |x| sol.value(x, 0.0)).unwrap();
        let params = Params::new(0.01, 0.02, 0.5).with_forcing(move |x, t| sol.forcing(x, t, 0.01));
        let mut state = scheme::init(&m0, &params).unwrap();
        while state.step() < 25 {
            let before = state.clone();
            state = scheme::bdf2_step(state, &params).unwrap();
            let res = scheme::step_equation_residual(&before, &state, &params).unwrap();
            v.check(res <= 1e-9, || {
                format!("update residual {res:e} at step {}", state.step())
            });
        }
    }

    for step in [1e-4, 1.0, 1e3] {
        for (grid, method) in [
            (Grid::line(10).unwrap(), SolverMethod::Direct),
            (Grid::cube(6).unwrap(), SolverMethod::Iterative),
        ] {
            let m0 = random_unit_field(grid, &mut r);
            let m1 = random_unit_field(grid, &mut r);
            let solver = SolverConfig {
                method,
                ..SolverConfig::default()
            };
            let params = Params::new(0.01, step, 2.0 * step).with_solver(solver);
            let out = scheme::init_with_levels(&m0, &m1, &params)
                .and_then(|s| scheme::bdf2_step(s, &params));
            match out {
                Ok(s) => v.check(s.last_residual() <= 1e-10, || {
                    format!("k = {step:e}: residual {:e}", s.last_residual())
                }),
                Err(e) => v.check(false, || format!("k = {step:e}: {e}")),
            }
        }
    }

    for sol in [ManufacturedSolution::Line, ManufacturedSolution::Cube] {
        for _ in 0..50 {
            let mut p = [0.5; 3];
            for a in 0..sol.dim() {
                p[a] = rand::Rng::gen_range(&mut r, 0.05..0.95);
            }
            let t = rand::Rng::gen_range(&mut r, 0.0..2.0);
            let h = 1e-3;
            let mut fd = [0.0; 3];
            for a in 0..sol.dim() {
                let at = |s: f64| {
                    let mut q = p;
                    q[a] += s * h;
                    sol.value(q, t)
                };
                for c in 0..3 {
                    fd[c] += (-at(2.0)[c] + 16.0 * at(1.0)[c] - 30.0 * at(0.0)[c]
                        + 16.0 * at(-1.0)[c]
                        - at(-2.0)[c])
                        / (12.0 * h * h);
                }
            }
            let d = vec3::max_abs(vec3::sub(fd, sol.laplacian(p, t)));
            v.check(d <= 1e-6, || {
                format!("{sol:?} Laplacian oracle off by {d:e}")
            });
        }
    }

    for p in [1.0, 2.0, 2.5] {
        let pts: Vec<_> = (0..5)
            .map(|i| (0.1 / 2f64.powi(i), 3.0 * (0.1 / 2f64.powi(i)).powf(p)))
            .collect();
        let fit = harness::fit_order(&pts).unwrap();
        v.check((fit - p).abs() <= 1e-12, || {
            format!("fit_order {fit} for exponent {p}")
        });
    }

    let secs = start.elapsed().as_secs_f64();
    v.check(secs < 10.0, || format!("suite took {secs:.1} s"));
    v.summary = format!("property suite in {secs:.2} s");
    v
}

fn a7() -> Verdict {
    let mut v = Verdict::new();
    let grid = Grid::line(200).unwrap();
    let sol = ManufacturedSolution::Line;
    let m0 = Field::from_fn(grid, |x| sol.value(x, 0.0)).unwrap();
    let run = |method| {
        let solver = SolverConfig {
            method,
            ..SolverConfig::default()
        };
        let params = Params::new(0.01, 5e-3, 1.0)
            .with_forcing(move |x, t| sol.forcing(x, t, 0.01))
            .with_solver(solver);
        let mut steps = 0;
        let mut count = |_: usize, _: f64, _: &llproj::State| {
            steps += 1;
            Control::Continue
        };
        let s = scheme::run(&m0, &params, &mut [&mut count as &mut Observer<f64>]).unwrap();
        assert_eq!(steps, 200);
        s.into_current()
    };
    let d = run(SolverMethod::Direct);
    let i = run(SolverMethod::Iterative);
    let gap = ops::norm_inf(&d.zip_interior(&i, vec3::sub).unwrap());
    v.check(gap <= 1e-8, || format!("direct vs iterative: {gap:e}"));
    v.summary = format!("direct vs iterative at T = 1: {gap:.2e}");
    v
}

fn main() {
    let mut all_ok = true;
    let mut report = |name: &str, v: Verdict| {
        all_ok &= v.ok;
        println!(
            "{name} {} {}",
            if v.ok { "PASS" } else { "FAIL" },
            v.summary
        );
        for f in &v.failures {
            println!("    {f}");
        }
    };
    report("A6", a6());
    report("A7", a7());
    report("A1", a1());
    report("A2", a2());
    report("A5", a5());
    let (v3, v4, _) = a3_a4();
    report("A3", v3);
    report("A4", v4);
    if !all_ok {
        std::process::exit(1);
    }
}
