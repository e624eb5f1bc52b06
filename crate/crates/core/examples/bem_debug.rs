use std::sync::Arc;
use eshaper_core::bem::{drude_dress, eigensolve, DrudeParams};
use eshaper_core::mesh::build_triangle_mesh;
use eshaper_core::units::BeamConfig;
use eshaper_core::modes::ModeBasis;
use num_complex::Complex64;

fn main() {
    let mesh = Arc::new(build_triangle_mesh(10.0, 2.0, 400, 0.5).unwrap());
    let raw = eigensolve(&mesh, 5).unwrap();
    let set = Arc::new(drude_dress(&raw, DrudeParams::silver()));
    eprintln!("groups: {:?}", set.degenerate_groups);
    for n in 0..set.len() {
        let mut moments = Vec::new();
        for m in 1..=4u32 {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, e) in set.mesh.elements.iter().enumerate() {
                let z = Complex64::new(e.centroid[0], e.centroid[1]);
                acc += set.sigmas[n][j] * e.area * z.powu(m);
            }
            moments.push(acc);
        }
        eprintln!("mode {n}: lambda {:+.4} omega {:.4}", set.lambdas[n], set.omegas[n]);
        for (m, mom) in moments.iter().enumerate() {
            eprintln!("   m={} moment = {:+.4e} {:+.4e}i  |m|={:.3e}", m+1, mom.re, mom.im, mom.norm());
        }
    }
    let beam = BeamConfig::from_energy(1.0e5, 1.5e-3, 0.75e-3, 1257, 49, Default::default()).unwrap();
    let basis = ModeBasis::plasmon(set, &beam);
    for n in 0..2 {
        let a = basis.w(n, [2.0, 1.0]);
        let b = basis.w(n, [-2.0, 1.0]);
        let c = basis.w(n, [1.0, 2.0]);
        let d = basis.w(n, [1.0, -2.0]);
        eprintln!("mode {n}: w(2,1)={a:.4e} w(-2,1)={b:.4e} (x-anti: {:.3})", (a+b).norm()/(a.norm().max(b.norm())));
        eprintln!("         w(1,2)={c:.4e} w(1,-2)={d:.4e} (y-anti: {:.3})", (c+d).norm()/(c.norm().max(d.norm())));
    }
}
