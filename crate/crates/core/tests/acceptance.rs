//! Acceptance suite: one PASS/FAIL line per criterion.

use std::time::Instant;

use koch_sipdg::assembly::{assemble_system, compute_i_down, compute_i_up, relative_map, Assembler, DGSpace, Poly};
use koch_sipdg::geometry::Similarity;
use koch_sipdg::linsolve::{dense_condition, dense_generalized_eigs, krylov_generalized_eigs, solve_dense, solve_spd};
use koch_sipdg::mesh::{build_boundary_refined, build_quasi_uniform, build_uniform, lqu_check, Mesh};
use koch_sipdg::moments::{
    composite_barycentre_koch, composite_barycentre_volume, koch_moments, snowflake_moments, wedge_moments,
    ReferenceIntegrals,
};
use koch_sipdg::studies::{run_conditioning, run_convergence, run_eigen, run_increments, Sequence};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn random_quadratic(rng: &mut ChaCha8Rng) -> Poly {
    Poly::from_coeffs(2, (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect())
}

fn moments() -> Outcome {
    let r3 = 3f64.sqrt();
    let w1 = wedge_moments::<f64>(1);
    let s = snowflake_moments::<f64>(4).unwrap();
    let j = koch_moments::<f64>(4).unwrap();
    let mut checks: Vec<(String, f64, f64)> = vec![
        ("I_1[1]".into(), w1.value(0, 0), r3 / 5.0),
        ("I_1[x]".into(), w1.value(1, 0), 11.0 / 60.0),
        ("I_1[x^2]".into(), w1.value(2, 0), 281.0 * r3 / 4400.0),
        ("I_1[y^2]".into(), w1.value(0, 2), 39.0 * r3 / 4400.0),
        ("|Omega|".into(), s.value(0, 0), 6.0 * r3 / 5.0),
        ("int x^2".into(), s.value(2, 0), 12.0 * r3 / 55.0),
        ("int y^2".into(), s.value(0, 2), 12.0 * r3 / 55.0),
    ];
    let koch = [
        ((0, 0), 1.0),
        ((1, 0), 0.5),
        ((0, 1), 1.0 / (6.0 * r3)),
        ((2, 0), 19.0 / 60.0),
        ((1, 1), 1.0 / (12.0 * r3)),
        ((0, 2), 1.0 / 60.0),
        ((3, 0), 9.0 / 40.0),
        ((2, 1), 13.0 / (280.0 * r3)),
        ((1, 2), 1.0 / 120.0),
        ((0, 3), 1.0 / (168.0 * r3)),
        ((4, 0), 92983.0 / 542640.0),
        ((3, 1), 47.0 / (1680.0 * r3)),
        ((2, 2), 47.0 / 10640.0),
        ((1, 3), 1.0 / (336.0 * r3)),
        ((0, 4), 83.0 / 108528.0),
    ];
    for ((a, b), v) in koch {
        checks.push((format!("J[x^{a} y^{b}]"), j.value(a, b), v));
    }
    let worst = checks.iter().map(|(_, got, want)| rel(*got, *want)).fold(0.0, f64::max);
    // odd snowflake moments and the wedge partition
    let mut odd = 0.0f64;
    for (a, b) in [(1, 0), (0, 1), (1, 1), (3, 0), (2, 1), (1, 2), (0, 3)] {
        odd = odd.max(s.value(a, b).abs());
    }
    let mut partition = 0.0f64;
    for k in 0..6 {
        let total: f64 = (1..=6).map(|i| wedge_moments::<f64>(i).values()[k]).sum();
        partition = partition.max((total - s.values()[k]).abs());
    }
    Outcome {
        pass: worst <= 1e-13 && odd <= 1e-15 && partition <= 1e-14,
        detail: format!(
            "{} closed forms, max rel err {worst:.1e}; odd moments {odd:.1e}; wedge partition {partition:.1e}",
            checks.len()
        ),
    }
}

/// A frame for the virtual neighbour across boundary slot `sm`.
fn virtual_neighbour(sm: usize) -> (usize, Similarity<f64>) {
    for sp in 1..=6 {
        for rot in 0..6 {
            let n_from_m = relative_map(sp, 2 * rot + 1, 0);
            let d = n_from_m.invert().shift;
            let k = ((d.y.atan2(d.x) / (std::f64::consts::PI / 6.0)).round() as i64).rem_euclid(12) as usize;
            if k.is_multiple_of(2) && k / 2 + 1 == sm {
                return (sp, n_from_m);
            }
        }
    }
    unreachable!("every slot has a neighbour frame")
}

fn divergence() -> Outcome {
    let mesh = build_quasi_uniform(3).unwrap();
    let ints = ReferenceIntegrals::<f64>::new();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    let mut count = 0;
    for f in &mesh.faces {
        let sm = f.slot_minus as usize;
        let km = &mesh.elements[f.minus];
        let (sp, n_from_m) = match f.plus {
            Some(n) => {
                let kn = &mesh.elements[n];
                (f.slot_plus.unwrap() as usize, relative_map(f.slot_plus.unwrap() as usize, km.chart.rot(), kn.chart.rot()))
            }
            None => virtual_neighbour(sm),
        };
        let m_from_n = n_from_m.invert();
        for _ in 0..100 {
            let w = random_quadratic(&mut rng);
            let v = random_quadratic(&mut rng);
            let down = compute_i_down(&w, &v, sm, &ints).unwrap();
            let up = compute_i_up(&w.pullback(&m_from_n), &v.pullback(&m_from_n), sp, &ints).unwrap();
            worst = worst.max((down + up).abs() / down.abs().max(1.0));
            count += 1;
        }
    }
    Outcome {
        pass: worst <= 1e-12,
        detail: format!("{count} pairs on {} faces of T'_3, max |I_down + I_up| / max(1, |I_down|) = {worst:.1e}", mesh.faces.len()),
    }
}

fn cardinalities() -> Outcome {
    let cases: Vec<(&str, Mesh, usize)> = vec![
        ("T_4", build_uniform(4).unwrap(), 2401),
        ("T'_7", build_quasi_uniform(7).unwrap(), 4039),
        ("T'_9", build_quasi_uniform(9).unwrap(), 35839),
        ("T'_{2,3}", build_boundary_refined(2, 3).unwrap(), 1567),
        ("T'_{3,2}", build_boundary_refined(3, 2).unwrap(), 1495),
        ("T'_{4,2}", build_boundary_refined(4, 2).unwrap(), 1861),
        ("T'_{2,4}", build_boundary_refined(2, 4).unwrap(), 6499),
        ("T'_{3,3}", build_boundary_refined(3, 3).unwrap(), 6427),
    ];
    let mut pass = true;
    let mut area = 0.0f64;
    let mut parts = Vec::new();
    for (name, mesh, want) in &cases {
        let rep = lqu_check(mesh);
        area = area.max(rep.area_error);
        pass &= mesh.len() == *want && rep.passed() && rep.area_error <= 1e-12;
        parts.push(format!("{name}={}", mesh.len()));
    }
    // the table's T'_{4,.} = 6793 entry
    let t43 = build_boundary_refined(4, 3).unwrap();
    let t44 = build_boundary_refined(4, 4).unwrap();
    for m in [&t43, &t44] {
        let rep = lqu_check(m);
        area = area.max(rep.area_error);
        pass &= rep.passed() && rep.area_error <= 1e-12;
    }
    pass &= t43.len() == 6793;
    Outcome {
        pass,
        detail: format!(
            "{}; T'_{{4,3}}={} and T'_{{4,4}}={} (table entry 6793 matches (4,3), not (4,4)); max area error {area:.1e}",
            parts.join(" "),
            t43.len(),
            t44.len()
        ),
    }
}

fn spd() -> Outcome {
    let t2 = build_quasi_uniform(2).unwrap();
    let mut min_eigs = Vec::new();
    for p in 1..=2 {
        let a = Assembler::new(DGSpace::new(&t2, p).unwrap()).assemble_a(10.0);
        let ev = a.to_dense().symmetric_eigenvalues();
        min_eigs.push(ev.min());
    }
    let meshes = [
        build_uniform(2).unwrap(),
        build_quasi_uniform(0).unwrap(),
        build_quasi_uniform(1).unwrap(),
        build_quasi_uniform(3).unwrap(),
        build_quasi_uniform(4).unwrap(),
        build_boundary_refined(2, 2).unwrap(),
        build_boundary_refined(3, 1).unwrap(),
    ];
    let mut asym = 0.0f64;
    for mesh in meshes.iter().chain(std::iter::once(&t2)) {
        for p in 1..=2 {
            let a = Assembler::new(DGSpace::new(mesh, p).unwrap()).assemble_a(10.0);
            asym = asym.max(a.asymmetry() / a.max_abs());
        }
    }
    Outcome {
        pass: min_eigs.iter().all(|&l| l > 0.0) && asym <= 1e-12,
        detail: format!(
            "T'_2 min eigenvalue p=1 {:.4e}, p=2 {:.4e}; max relative asymmetry {asym:.1e}",
            min_eigs[0], min_eigs[1]
        ),
    }
}

fn smooth_convergence() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for p in 1..=2 {
        let t = run_convergence(0.1, p, 6, 4).unwrap();
        let (dg, l2) = (t.slope("dg").unwrap(), t.slope("l2").unwrap());
        let ok_dg = (dg - p as f64).abs() <= 0.3;
        let ok_l2 = (l2 - (p + 1) as f64).abs() <= 0.3;
        pass &= ok_dg && ok_l2;
        parts.push(format!(
            "p={p}: DG {dg:.3} [{}], L2 {l2:.3} [{}]",
            if ok_dg { "ok" } else { "out" },
            if ok_l2 { "ok" } else { "out" }
        ));
    }
    // one more refinement, for information
    let mut extra = Vec::new();
    for p in 1..=2 {
        let t = run_convergence(0.1, p, 7, 4).unwrap();
        extra.push(format!("p={p} DG {:.3} L2 {:.3}", t.slope("dg").unwrap(), t.slope("l2").unwrap()));
    }
    Outcome {
        pass,
        detail: format!("T'_0..T'_6: {}; through T'_7: {}", parts.join("; "), extra.join(", ")),
    }
}

fn increments() -> Outcome {
    let q = run_increments(2, Sequence::Quasi { ell_max: 7 }, 4).unwrap();
    let b = run_increments(2, Sequence::Boundary { ell: 3, ellstar_max: 3 }, 4).unwrap();
    let sq = q.slope("quasi").unwrap();
    let sb = b.slope("boundary").unwrap();
    let positive = q.rows.iter().chain(&b.rows).all(|r| r.err_l2.unwrap() > 0.0);
    let ok_q = (-0.65..=-0.35).contains(&sq);
    let ok_b = (-1.2..=-0.8).contains(&sb);
    Outcome {
        pass: ok_q && ok_b && positive,
        detail: format!(
            "quasi T'_0..T'_7 slope {sq:.3} [{}]; boundary T'_{{3,0..3}} slope {sb:.3} [{}]",
            if ok_q { "ok" } else { "out" },
            if ok_b { "ok" } else { "out" }
        ),
    }
}

fn conditioning() -> Outcome {
    let t = run_conditioning(1, &[Sequence::Quasi { ell_max: 5 }]).unwrap();
    let s = t.slope("quasi").unwrap();
    let first = t.rows[0].cond.unwrap();
    Outcome {
        pass: (0.7..=1.3).contains(&s) && first >= 1.0,
        detail: format!("T'_0..T'_5, p=1: slope {s:.3}, cond(T'_5) = {:.4e}", t.rows.last().unwrap().cond.unwrap()),
    }
}

fn eigenvalues() -> Outcome {
    let mesh = build_boundary_refined(4, 2).unwrap();
    let t = run_eigen(&mesh, 2, 10, 10.0).unwrap();
    let worst = t.rows.iter().map(|r| r.rel_err.unwrap()).fold(0.0, f64::max);
    let l: Vec<f64> = t.rows.iter().map(|r| r.lambda_scaled.unwrap()).collect();
    let pairs = [(1, 2), (3, 4), (7, 8)];
    let split = pairs.iter().map(|&(i, j)| rel(l[i], l[j])).fold(0.0, f64::max);
    let n = t.rows[0].n_dofs;
    Outcome {
        pass: mesh.len() == 1861 && n == 11166 && worst < 0.02 && split <= 10.0 * 1e-8,
        detail: format!(
            "T'_{{4,2}} ({} elements, {n} DOFs): scaled {}; max rel err {worst:.2e}; degenerate pair split {split:.1e}",
            mesh.len(),
            l.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ")
        ),
    }
}

fn oracles() -> Outcome {
    let t2 = build_quasi_uniform(2).unwrap();
    let mut cg_err = 0.0f64;
    for p in 1..=2 {
        let space = DGSpace::new(&t2, p).unwrap();
        let sys = assemble_system(&space, 10.0, |_| 1.0, 4).unwrap();
        let (x, _) = solve_spd(&sys.a, &sys.b, 1e-12).unwrap();
        let xd = solve_dense(&sys.a, &sys.b).unwrap();
        let scale = xd.iter().map(|v| v.abs()).fold(0.0, f64::max);
        cg_err = cg_err.max(x.iter().zip(&xd).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max) / scale);
    }
    let mut eig_err = 0.0f64;
    let mut eig_res = 0.0f64;
    for p in 1..=2 {
        let mut asm = Assembler::new(DGSpace::new(&t2, p).unwrap());
        let a = asm.assemble_a(10.0);
        let m = asm.assemble_m();
        let dense = dense_generalized_eigs(&a, &m).unwrap();
        let it = krylov_generalized_eigs(&a, &m, 10, 1e-10).unwrap();
        for i in 0..10 {
            eig_err = eig_err.max(rel(it.values[i], dense.values[i]));
            eig_res = eig_res.max(it.residuals[i]);
        }
        let _ = dense_condition(&a).unwrap();
    }
    // composite barycentre rules against the moment tables
    let s = snowflake_moments::<f64>(2).unwrap();
    let j = koch_moments::<f64>(4).unwrap();
    let id = Similarity::<f64>::identity();
    let vol: Vec<f64> = (2..=6)
        .map(|l| rel(composite_barycentre_volume(|x| x.x * x.x, &id, l).unwrap(), s.value(2, 0)))
        .collect();
    let koch: Vec<f64> = (2..=8)
        .map(|l| rel(composite_barycentre_koch(|x| x.x.powi(4), &id, l).unwrap(), j.value(4, 0)))
        .collect();
    let decreasing = |v: &[f64]| v.windows(2).all(|w| w[1] < w[0]);
    let quad_ok = decreasing(&vol) && decreasing(&koch) && *vol.last().unwrap() < 1e-3 && *koch.last().unwrap() < 1e-3;
    Outcome {
        pass: cg_err <= 1e-8 && eig_err <= 1e-8 && eig_res <= 1e-10 && quad_ok,
        detail: format!(
            "T'_2: CG vs dense {cg_err:.1e}; Krylov vs dense eigenvalues {eig_err:.1e} (residual {eig_res:.1e}); barycentre rel err x^2 {:.1e} (level 6), Koch x^4 {:.1e} (level 8)",
            vol.last().unwrap(),
            koch.last().unwrap()
        ),
    }
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 9] = [
        ("moment exactness", moments),
        ("divergence identity", divergence),
        ("mesh cardinalities and area", cardinalities),
        ("SPD and symmetry", spd),
        ("smooth convergence", smooth_convergence),
        ("singular increments", increments),
        ("conditioning", conditioning),
        ("eigenvalues", eigenvalues),
        ("oracle equivalences", oracles),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = f();
        let secs = start.elapsed().as_secs_f64();
        println!(
            "{} {}. {name}: {} ({secs:.1} s)",
            if out.pass { "PASS" } else { "FAIL" },
            i + 1,
            out.detail
        );
        if !out.pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
