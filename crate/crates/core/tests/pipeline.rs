//! Cross-module integration: solver output flowing through the transforms,
//! nodal extraction and order estimation, checked against the reference
//! solutions.

use brokenpde::*;

fn e(text: &str) -> Expr {
    Expr::parse(text).unwrap()
}

fn jump_model(a_plus: &str, a_minus: &str) -> CoefficientModel {
    CoefficientModel::jump(e(a_plus), e(a_minus), [e("0"), e("0")], 0.4, 0.5, 0.3).unwrap()
}

fn sup_diff(a: &ScalarField, b: &ScalarField) -> f64 {
    a.values().iter().zip(b.values()).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

#[test]
fn solver_error_halves_at_first_order_under_refinement() {
    // Against the transform-inversion reference the sup error must drop by
    // at least 1.7x per mesh halving (the interface limits the order to ~1).
    // The 33-point grid is still pre-asymptotic, so start at 65.
    let mut errs = Vec::new();
    for n in [65usize, 129] {
        let grid = GridSpec::square(-1.0, 1.0, n).unwrap();
        let p = BrokenProblem::new(grid.clone(), jump_model("2", "1"), e("x"));
        let rep = picard_solve(&p).unwrap();
        assert!(rep.converged);
        let oracle = harmonic_inversion_exact(&p.coeff, &p.boundary, &grid).unwrap();
        let exact = oracle.sample(&grid).unwrap();
        let err = sup_diff(&rep.u, &exact);
        assert!(err <= 3.0 * grid.spacing(0), "n = {n}: error {err}");
        errs.push(err);
    }
    assert!(errs[0] / errs[1] >= 1.7, "refinement ratio {}", errs[0] / errs[1]);
}

#[test]
fn one_dimensional_solve_reproduces_the_transmission_oracle() {
    let grid = GridSpec::line(-1.0, 1.0, 129).unwrap();
    let p = BrokenProblem::new(grid.clone(), jump_model("2", "1"), e("x"));
    let rep = picard_solve(&p).unwrap();
    assert!(rep.converged);
    let oracle = transmission_1d(2.0, 1.0, -1.0, 1.0, -1.0, 1.0).unwrap();
    let exact = oracle.sample(&grid).unwrap();
    assert!(sup_diff(&rep.u, &exact) <= 3.0 * grid.spacing(0));

    // The extracted crossing sits within one cell of x0 = -1/3.
    let ns = extract_nodal(&rep.u);
    assert_eq!(ns.sample_points.len(), 1);
    let x0 = oracle.interface().unwrap();
    assert!((ns.sample_points[0][0] - x0).abs() <= 2.0 * grid.spacing(0));
}

#[test]
fn interface_points_of_a_broken_solve_are_first_order() {
    // Order estimation + classification along the nodal set of the jump
    // solve: interior interface points are nondegenerate.
    let grid = GridSpec::square(-1.0, 1.0, 129).unwrap();
    let p = BrokenProblem::new(grid.clone(), jump_model("2", "1"), e("x"));
    let rep = picard_solve(&p).unwrap();
    assert!(rep.converged);
    let mut ns = extract_nodal(&rep.u);
    let mut classified = 0usize;
    for k in 0..ns.sample_points.len() {
        let z = ns.sample_points[k];
        if !grid.contains_ball(z, 0.32) {
            continue;
        }
        let est = vanishing_order(&rep.u, z, 0.32, 4).unwrap();
        let class = classify(&est);
        assert_eq!(class, PointClass::Nondegenerate, "z = {z:?}, d_hat = {}", est.d_hat);
        ns.set_class(k, class);
        classified += 1;
    }
    assert!(classified > 10, "only {classified} points classified");
}

#[test]
fn degenerate_origin_pipeline() {
    // Boundary data whose transform is a harmonic polynomial of order 2 at
    // the origin: the order estimate, the fit, and the tangent diagnostic all
    // agree on a planar degenerate point.
    let grid = GridSpec::square(-1.0, 1.0, 129).unwrap();
    let q = "x^2 - y^2 + 0.75*(x^3 - 3*x*y^2)";
    let boundary = Expr::parse(&format!("max({q}, 0)/2 + min({q}, 0)")).unwrap();
    let p = BrokenProblem::new(grid.clone(), jump_model("2", "1"), boundary);
    let rep = picard_solve(&p).unwrap();
    assert!(rep.converged);

    let est = vanishing_order(&rep.u, [0.0, 0.0], 0.4, 4).unwrap();
    assert!((est.d_hat - 2.0).abs() <= 0.1, "d_hat {}", est.d_hat);
    assert_eq!(classify(&est), PointClass::Degenerate(2));

    let v = phi_freeze(&rep.u, [0.0, 0.0], &p.coeff).unwrap();
    let fit = harmonic_fit(&v, [0.0, 0.0], 2, 0.3, true).unwrap();
    // Leading pair ~ Re zeta^2 with unit coefficient.
    assert!((fit.leading()[0] - 1.0).abs() <= 0.05, "leading {:?}", fit.leading());
    assert_eq!(tangent_dim(&fit).unwrap(), 0);

    // The same saddle through the w route shares the nodal set.
    let tf = w_transform(&rep.u, &p.coeff).unwrap();
    let ns_u = extract_nodal(&rep.u);
    let ns_w = extract_nodal(&tf.v);
    assert!((ns_u.total_length() - ns_w.total_length()).abs() <= 4.0 * grid.max_spacing());
}

#[test]
fn inversion_reference_stays_harmonic_on_fine_grids() {
    // The absolute residual target inside the reference solve must keep the
    // discrete Laplacian below 1e-9 * ||h||_inf even at n = 257, where the
    // relative CG tolerance alone would not.
    let grid = GridSpec::square(-1.0, 1.0, 257).unwrap();
    let m = jump_model("2", "1");
    let oracle = harmonic_inversion_exact(&m, &e("x"), &grid).unwrap();
    let OracleSolution::Inversion { transformed, .. } = &oracle else { panic!() };
    let lap = transformed.interior_laplacian().sup_norm();
    assert!(
        lap <= 1e-9 * transformed.sup_norm(),
        "laplacian residual {lap} vs field sup {}",
        transformed.sup_norm()
    );
}

#[test]
fn frequency_of_power_law_solve_is_near_one() {
    // g = x gives an almost-linear solution; its transform carries frequency
    // close to 1 over mid radii.
    let grid = GridSpec::square(-1.0, 1.0, 129).unwrap();
    let coeff =
        CoefficientModel::power(1.0, e("1"), e("1"), [e("0"), e("0")], 0.4, 0.5, 0.3).unwrap();
    let p = BrokenProblem::new(grid.clone(), coeff, e("x"));
    let rep = picard_solve(&p).unwrap();
    assert!(rep.converged);
    let tf = w_transform(&rep.u, &p.coeff).unwrap();
    let fields = FrequencyFields::with_lower_order(&tf.v, &rep.u, &tf.b_vec, &tf.c);
    let profile = frequency_profile(&fields, [0.0, 0.0], &[0.2, 0.3, 0.4]);
    assert!(profile.skipped.is_empty() && !profile.any_degenerate());
    for row in &profile.rows {
        let n = row.n.unwrap();
        assert!(n > 0.3 && n < 1.5, "N({}) = {n}", row.r);
    }
}
