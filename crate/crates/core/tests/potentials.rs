use parastokes::domain::{build_box_domain, build_quotient_domain, Domain, Field};
use parastokes::kernels::{apply_parabolic_dirac, Convention, KernelParams, Sign};
use parastokes::lattice::LatticeSpec;
use parastokes::potentials::{BoundaryData, ContextOptions, OperatorContext, PotentialError};
use parastokes::Spinor;

fn context(domain: Domain, k: f64) -> OperatorContext {
    OperatorContext::new(domain, KernelParams::new(k).unwrap(), Convention::ADOPTED, ContextOptions::default()).unwrap()
}

fn unit_box(n: usize) -> OperatorContext {
    let h = 1.0 / n as f64;
    context(build_box_domain([1.0; 3], 1.0, h, h).unwrap(), 1.0)
}

fn channel(n: usize) -> OperatorContext {
    let h = 1.0 / n as f64;
    let spec = LatticeSpec::new(2, vec![false, false]).unwrap();
    context(build_quotient_domain(&spec, &[1.0], 1.0, h, h).unwrap(), 1.0)
}

fn wavy(ctx: &OperatorContext) -> Field {
    Field::from_fn(&ctx.domain.grid, |x, t| {
        Spinor(std::array::from_fn(|c| {
            let c = c as f64;
            (1.3 * x[0] + 0.7 * c).sin() * (0.9 * x[1] - 0.4 * x[2] + c).cos() * (1.0 + t)
        }))
    })
}

fn rel(a: &Field, b: &Field) -> f64 {
    a.sub(b).unwrap().l2() / b.l2()
}

#[test]
fn zero_maps_to_zero() {
    let ctx = unit_box(4);
    let g = &ctx.domain.grid;
    let z = Field::zeros(g);
    assert_eq!(ctx.teodorescu(&z).unwrap().max_abs(), 0.0);
    assert_eq!(ctx.cauchy(&BoundaryData::zeros(&ctx.domain)).unwrap().max_abs(), 0.0);
    assert!(ctx.trace(&z).unwrap().values.iter().all(|v| *v == Spinor::ZERO));
    assert_eq!(ctx.bergman_p(&z).unwrap().max_abs(), 0.0);
}

#[test]
fn operators_are_causal() {
    let ctx = unit_box(4);
    let g = ctx.domain.grid.clone();
    let nc = g.ncells();
    let mut u = Field::zeros(&g);
    for v in &mut u.values_mut()[2 * nc..3 * nc] {
        *v = Spinor::new([1.0, -0.5, 0.25, 2.0], [0.3, 0.0, -1.0, 0.5]);
    }
    let tu = ctx.teodorescu(&u).unwrap();
    assert!(tu.values()[..2 * nc].iter().all(|v| *v == Spinor::ZERO));
    assert!(tu.values()[2 * nc..].iter().any(|v| v.norm() > 0.0));

    let mut bd = BoundaryData::zeros(&ctx.domain);
    let idx = ctx.domain.lateral_index(1, 0, [1, 2], 3);
    bd.values[idx] = Spinor::new([1.0, 2.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]);
    let fu = ctx.cauchy(&bd).unwrap();
    assert!(fu.values()[..3 * nc].iter().all(|v| *v == Spinor::ZERO));
    assert!(fu.values()[3 * nc..].iter().any(|v| v.norm() > 0.0));
}

#[test]
fn terminal_cap_is_ignored() {
    let ctx = unit_box(3);
    let mut bd = BoundaryData::zeros(&ctx.domain);
    for i in ctx.domain.top_range() {
        bd.values[i] = Spinor::scalar(1.0);
    }
    assert_eq!(ctx.cauchy(&bd).unwrap().max_abs(), 0.0);
}

#[test]
fn trace_reproduces_affine_fields() {
    let ctx = unit_box(5);
    let affine = |x: [f64; 3], t: f64| {
        Spinor(std::array::from_fn(|c| 1.0 + c as f64 * x[0] - 2.0 * x[1] + 0.5 * x[2] + (3.0 - c as f64) * t))
    };
    let u = Field::from_fn(&ctx.domain.grid, affine);
    let tr = ctx.trace(&u).unwrap();
    for (el, v) in ctx.domain.boundary.iter().zip(&tr.values) {
        let exact = affine(el.pos.x, el.pos.t);
        assert!((*v - exact).norm() < 1e-12, "{:?}", el.kind);
    }
}

#[test]
fn right_quaternion_linearity() {
    let ctx = channel(3);
    let u = wavy(&ctx);
    let q = [0.3, -1.0, 0.5, 2.0];
    let lhs = ctx.teodorescu(&u.map(|v| v.right_mul(q))).unwrap();
    let rhs = ctx.teodorescu(&u).unwrap().map(|v| v.right_mul(q));
    assert!(rel(&lhs, &rhs) < 1e-12);
    let lhs = ctx.bergman_p(&u.map(|v| v.right_mul(q))).unwrap();
    let rhs = ctx.bergman_p(&u).unwrap().map(|v| v.right_mul(q));
    assert!(rel(&lhs, &rhs) < 1e-9);
}

#[test]
fn rejects_foreign_grids_and_conventions() {
    let ctx = unit_box(3);
    let other = build_box_domain([1.0; 3], 1.0, 0.25, 0.25).unwrap();
    assert_eq!(ctx.teodorescu(&Field::zeros(&other.grid)), Err(PotentialError::GridMismatch));
    assert!(matches!(
        ctx.cauchy(&BoundaryData { values: vec![Spinor::ZERO; 3] }),
        Err(PotentialError::BoundaryShape { got: 3, .. })
    ));
    let wrong = Convention { fdagger_power: 2, c_power: 2 };
    let err = OperatorContext::new(other, KernelParams::new(1.0).unwrap(), wrong, ContextOptions::default());
    assert!(matches!(err, Err(PotentialError::Uncalibrated { .. })));
}

#[test]
fn teodorescu_commutes_with_torus_translations() {
    for anti in [vec![false, false, false], vec![true, false, true]] {
        let spec = LatticeSpec::new(3, anti.clone()).unwrap();
        let ctx = context(build_quotient_domain(&spec, &[], 0.5, 0.25, 0.125).unwrap(), 1.0);
        let g = ctx.domain.grid.clone();
        let u = wavy(&ctx);
        // shift by one cell along x; the cell that wraps picks up the spin sign
        let shift = |f: &Field| {
            let mut out = Field::zeros(&g);
            for m in 0..g.nt {
                for ci in 0..g.ncells() {
                    let c = g.cell_of(ci);
                    let mut d = c;
                    d[0] = (c[0] + 1) % g.dims[0];
                    let sign = if anti[0] && d[0] == 0 { -1.0 } else { 1.0 };
                    out.values_mut()[g.index(m, d)] = f.at(m, c).scale(sign);
                }
            }
            out
        };
        let a = ctx.teodorescu(&shift(&u)).unwrap();
        let b = shift(&ctx.teodorescu(&u).unwrap());
        assert!(rel(&a, &b) < 1e-12, "{anti:?}");
    }
}

#[test]
fn borel_pompeiu_on_the_box() {
    let ctx = unit_box(8);
    let u = wavy(&ctx);
    let du = apply_parabolic_dirac(&u, &ctx.params, Sign::Plus);
    let lhs = ctx.teodorescu(&du).unwrap().add(&ctx.cauchy(&ctx.trace(&u).unwrap()).unwrap()).unwrap();
    assert!(rel(&lhs, &u) < 0.03, "{}", rel(&lhs, &u));
}

#[test]
fn bergman_projection_on_the_channel() {
    let ctx = channel(3);
    let info = ctx.bergman_info().unwrap();
    assert!(info.condition_estimate < 1e12);
    let u = wavy(&ctx);
    let p = ctx.bergman_p(&u).unwrap();
    let pp = ctx.bergman_p(&p).unwrap();
    assert!(rel(&pp, &p) < 1e-6);
    let q = ctx.bergman_q(&u).unwrap();
    assert!(rel(&p.add(&q).unwrap(), &u) < 1e-14);
    let many = ctx.bergman_p_many(&[u.clone(), u.scale(-2.0)]).unwrap();
    assert!(rel(&many[0], &p) < 1e-10 && rel(&many[1], &p.scale(-2.0)) < 1e-10);
}
