fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("debug")).init();
    use motionforge::nlp::*;
    struct Obj;
    impl Objective for Obj {
        fn value(&self, x: &[f64]) -> f64 { x[0] * x[0] }
        fn value_grad(&self, x: &[f64], g: &mut [f64]) -> f64 { g[0] = 2.0 * x[0]; x[0] * x[0] }
    }
    struct Ineq { sp: Sparsity }
    impl ConstraintSet for Ineq {
        fn dim(&self) -> usize { 1 }
        fn eval(&self, x: &[f64], out: &mut [f64]) { out[0] = x[0] - 1.0; }
        fn jacobian_values(&self, _x: &[f64], out: &mut [f64]) { out[0] = 1.0; }
        fn sparsity(&self) -> &Sparsity { &self.sp }
    }
    let mut sp = Sparsity::default();
    sp.push(0, 0);
    let p = NlpProblem {
        num_vars: 1,
        bounds: vec![(-1e20, 1e20)],
        objective: Box::new(Obj),
        equalities: Box::new(NoConstraints::new()),
        inequalities: Box::new(Ineq { sp }),
    };
    let cfg = SolverConfig { kkt_tol: 1e-8, ..Default::default() };
    let sol = solve(&p, &[3.0], &cfg);
    println!("status {:?} x {} mu {} kkt {:.2e} iters {}", sol.status, sol.x[0], sol.ineq_multipliers[0], sol.kkt_residual, sol.iterations);
}
