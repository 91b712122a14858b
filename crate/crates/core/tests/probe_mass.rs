use horn_core::sym::SingularModel;
use horn_core::SymPipeline;
use std::time::Instant;

#[test]
#[ignore]
fn probe_rho_times() {
    let pipe = SymPipeline::spin_one_pair().unwrap();
    for (p, q) in [
        (-0.8, -0.02),
        (-1.25, -0.15),
        (-3.55, -0.01),
        (-1.0, -0.05),
        (-2.5, -1.5),
        (-3.55, -1.0),
        (-3.55, -1e-6),
        (-0.5, -1e-6),
    ] {
        let t = Instant::now();
        let r = pipe.rho(p, q).unwrap();
        let dt = t.elapsed();
        println!("rho({p},{q}) = {:.10e}   [{:?}]", r.value, dt);
        let cs = pipe.critical_zs(p, q).unwrap();
        let guard = cs.all_zs();
        for (lo, hi) in cs.support() {
            let r = horn_core::quadrature::integrate_sqrt_endpoints(
                |z| pipe.phi_guarded(p, q, &guard, z).unwrap_or(0.0),
                lo,
                hi,
                1e-8,
            );
            println!(
                "    piece ({lo:.9},{hi:.9}): val {:.6e} err {:.1e} evals {}",
                r.value, r.abs_err, r.evals
            );
        }
    }
}

#[test]
#[ignore]
fn probe_window() {
    let pipe = SymPipeline::spin_one_pair().unwrap();
    let t = Instant::now();
    let m = pipe.window_mass((-3.6, -3.5), (-2.0, 0.0), 5e-5).unwrap();
    println!("window mass = {:.8}   [{:?}]", m, t.elapsed());
}

#[test]
#[ignore]
fn probe_total() {
    let pipe = SymPipeline::spin_one_pair().unwrap();
    let t = Instant::now();
    let m = pipe.total_mass(1e-3).unwrap();
    println!("total mass = {:.8}   [{:?}]", m, t.elapsed());
}

#[test]
#[ignore]
fn probe_scans() {
    let pipe = SymPipeline::spin_one_pair().unwrap();
    let cases: Vec<(&str, SingularModel, u32, u32)> = vec![
        ("dashed", SingularModel::DashedLine { p: -2.0 }, 4, 8),
        ("q0-left", SingularModel::QAxisOuter { p: -2.0 }, 4, 10),
        ("q0-right", SingularModel::QAxisInner { p: -0.5 }, 4, 10),
        ("m1", SingularModel::PointM1 { halved: false }, 4, 9),
        ("corner-m4", SingularModel::CornerM4 { kappa: 1.0 }, 4, 9),
        ("corner-0", SingularModel::CornerOrigin { kappa: 2.0 }, 4, 9),
        ("corner-m3m2", SingularModel::CornerM3M2 { kappa: 0.5 }, 4, 9),
    ];
    for (name, model, jmin, jmax) in cases {
        let t = Instant::now();
        match pipe.singular_scan(&model, jmin, jmax) {
            Ok(rows) => {
                print!("{name}: ");
                for r in &rows {
                    print!("{:.4} ", r.ratio);
                }
                println!("  [{:?}]", t.elapsed());
            }
            Err(e) => println!("{name}: ERR {e}   [{:?}]", t.elapsed()),
        }
    }
}

#[test]
#[ignore]
fn probe_point_25() {
    let pipe = SymPipeline::spin_one_pair().unwrap();
    let (p, q) = (-2.5, -1.5);
    let cs = pipe.critical_zs(p, q).unwrap();
    for c in &cs.zs {
        println!("crit z={:.15} relevant={} mult={}", c.z, c.relevant, c.multiplicity);
    }
    println!("counts {:?}", cs.counts);
    let guard = cs.all_zs();
    // coarse scan for interior spikes
    let mut worst = (0.0f64, 0.0f64);
    for k in 1..4000 {
        let z = 0.25 * k as f64 / 4000.0;
        let v = pipe.phi_guarded(p, q, &guard, z).unwrap_or(f64::NAN);
        if v > worst.1 {
            worst = (z, v);
        }
    }
    println!("max phi at z={:.9} val={:.6e}", worst.0, worst.1);
    // zoom around the max
    let z0 = worst.0;
    for dz in [-1e-4, -1e-5, -1e-6, 0.0, 1e-6, 1e-5, 1e-4] {
        let z = z0 + dz;
        let v = pipe.phi_guarded(p, q, &guard, z).unwrap_or(f64::NAN);
        println!("  phi({z:.9}) = {v:.6e}");
    }
}

#[test]
#[ignore]
fn probe_q0_layer() {
    let pipe = SymPipeline::spin_one_pair().unwrap();
    for (p, q) in [(-3.55, -1e-6), (-0.5, -1e-6)] {
        let cs = pipe.critical_zs(p, q).unwrap();
        println!("(p,q)=({p},{q})");
        for c in &cs.zs {
            println!("  crit z={:.15} relevant={} mult={}", c.z, c.relevant, c.multiplicity);
        }
        println!("  counts {:?}", cs.counts);
        let guard = cs.all_zs();
        let zm = cs.zs[cs.zs.len() - 2].z; // last interior transition
        println!("  approach to upper transition zm={zm:.12}:");
        for k in 2..=40u32 {
            let d = 2.0f64.powi(-(k as i32));
            let z = zm - d;
            if z <= 0.0 {
                break;
            }
            let v = pipe.phi_guarded(p, q, &guard, z).unwrap_or(f64::NAN);
            if k % 2 == 0 {
                println!("    d=2^-{k}={d:.3e}  phi={v:.6e}  phi*d={:.6e}  phi*sqrt(d)={:.6e}", v * d, v * d.sqrt());
            }
        }
    }
}

#[test]
#[ignore]
fn probe_micro_piece() {
    let pipe = SymPipeline::spin_one_pair().unwrap();
    for (p, q) in [(-0.5, -1e-6), (-3.55, -1e-6)] {
        let cs = pipe.critical_zs(p, q).unwrap();
        println!("(p,q)=({p},{q}) counts {:?}", cs.counts);
        for c in &cs.zs {
            println!("  crit z={:.15} relevant={} mult={}", c.z, c.relevant, c.multiplicity);
        }
        let guard = cs.all_zs();
        for (lo, hi) in cs.support() {
            let w = hi - lo;
            println!("  piece ({lo:.15},{hi:.15}) width {w:.3e}");
            if w < 1e-6 {
                for frac in [0.1, 0.3, 0.5, 0.7, 0.9] {
                    let z = lo + frac * w;
                    let v = pipe.phi_guarded(p, q, &guard, z);
                    println!("    phi(lo+{frac}w) = {v:?}");
                }
            }
        }
    }
}
