//! The conic modeling layer on its own: an LP corner, an exponential-cone
//! epigraph, a rotated second-order cone and an infeasible program.

use ecofl::subproblem::{solve, ConicProgram, LinExpr, DEFAULT_TOL};

fn main() -> ecofl::Result<()> {
    // min x - 2y on a box
    let mut lp = ConicProgram::new();
    let x = lp.add_block("x", 1);
    let y = lp.add_block("y", 1);
    lp.objective = LinExpr::term(x, 1.0).plus(y, -2.0);
    lp.add_nonneg("x >= 0", LinExpr::var(x));
    lp.add_nonneg("x <= 1", LinExpr::term(x, -1.0).plus_const(1.0));
    lp.add_nonneg("y >= 0", LinExpr::var(y));
    lp.add_nonneg("y <= 3", LinExpr::term(y, -1.0).plus_const(3.0));
    let s = solve(&lp, DEFAULT_TOL)?;
    println!(
        "LP: {:?} x={:.3e} y={:.6} obj={:.6}",
        s.status, s.x[x], s.x[y], s.objective
    );

    // min t s.t. e^x <= t, x >= 0
    let mut ep = ConicProgram::new();
    let x = ep.add_block("x", 1);
    let t = ep.add_block("t", 1);
    ep.objective = LinExpr::var(t);
    ep.add_exp("e^x <= t", LinExpr::var(x), LinExpr::var(t));
    ep.add_nonneg("x >= 0", LinExpr::var(x));
    let s = solve(&ep, DEFAULT_TOL)?;
    println!(
        "exp: {:?} x={:.3e} obj={:.9} ({} iterations)",
        s.status, s.x[x], s.objective, s.iterations
    );

    // min r + d s.t. 9 <= r d: r = d = 3
    let mut rs = ConicProgram::new();
    let r = rs.add_block("r", 1);
    let d = rs.add_block("d", 1);
    rs.objective = LinExpr::var(r).plus(d, 1.0);
    rs.add_rotated(
        "3^2 <= r d",
        vec![LinExpr::constant(3.0)],
        LinExpr::var(r),
        LinExpr::var(d),
    );
    let s = solve(&rs, DEFAULT_TOL)?;
    println!("rotated SOC: {:?} r={:.6} d={:.6}", s.status, s.x[r], s.x[d]);

    let mut bad = ConicProgram::new();
    let x = bad.add_block("x", 1);
    bad.objective = LinExpr::var(x);
    bad.add_nonneg("x >= 2", LinExpr::var(x).plus_const(-2.0));
    bad.add_nonneg("x <= 1", LinExpr::term(x, -1.0).plus_const(1.0));
    println!("infeasible: {:?}", solve(&bad, DEFAULT_TOL)?.status);
    Ok(())
}
