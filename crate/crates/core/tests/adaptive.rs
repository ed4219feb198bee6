use rdfem::adapt::{adaptive_solve, AdaptiveOptions};
use rdfem::experiments::{target_box, target_nonzero_bc};
use rdfem::mesh::TetMesh;
use rdfem::solver::SolverRegistry;

/// Distance from `x` to the surface of the box `[1/4, 3/4]^3`.
fn box_distance(x: &[f64; 3]) -> f64 {
    let outside: f64 = x
        .iter()
        .map(|&c| (0.25 - c).max(c - 0.75).max(0.0).powi(2))
        .sum::<f64>()
        .sqrt();
    if outside > 0.0 {
        outside
    } else {
        x.iter().map(|&c| (c - 0.25).min(0.75 - c)).fold(f64::INFINITY, f64::min)
    }
}

#[test]
fn refinement_follows_the_jump() {
    let opts = AdaptiveOptions { dof_budget: 4000, ..Default::default() };
    let r = adaptive_solve(TetMesh::build_structured_cube(4).unwrap(), &target_box(), 1e-4, &opts, &SolverRegistry::default())
        .unwrap();
    assert!(r.history.len() > 2);
    for (level, marked) in r.marked.iter().enumerate().skip(1) {
        assert!(!marked.is_empty(), "level {level}");
    }
    // the finest tets sit on the discontinuity
    let m = &r.mesh;
    let finest = (0..m.n_tets()).map(|t| m.diameter(t)).fold(f64::INFINITY, f64::min);
    let small: Vec<usize> = (0..m.n_tets()).filter(|&t| m.diameter(t) < 1.01 * finest).collect();
    let near = small
        .iter()
        .filter(|&&t| box_distance(&m.centroid(t)) < 1.5 * m.diameter(t))
        .count();
    assert!(near as f64 >= 0.9 * small.len() as f64, "{near} of {} finest tets near the jump", small.len());
    assert!(r.history.iter().all(|l| l.converged && (3..=30).contains(&l.iterations) || l.dofs < 100));
}

#[test]
fn boundary_layer_is_refined() {
    let opts = AdaptiveOptions { dof_budget: 3000, ..Default::default() };
    let r = adaptive_solve(
        TetMesh::build_structured_cube(4).unwrap(),
        &target_nonzero_bc(),
        1e-4,
        &opts,
        &SolverRegistry::default(),
    )
    .unwrap();
    let m = &r.mesh;
    let finest = (0..m.n_tets()).map(|t| m.diameter(t)).fold(f64::INFINITY, f64::min);
    let on_boundary = (0..m.n_tets())
        .filter(|&t| m.diameter(t) < 1.01 * finest)
        .all(|t| m.tets()[t].iter().any(|&v| m.boundary_vertex()[v as usize]));
    assert!(on_boundary);
    let h = &r.history;
    assert!(h.last().unwrap().l2_error_sq < h[0].l2_error_sq);
}
