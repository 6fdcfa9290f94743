//! P1/P0 finite elements on a regular triangulation of the unit square.

mod assembly;
pub mod csr;
mod linsolve;
mod mesh;

pub use assembly::{
    assemble_mass_p1, assemble_mixed_p0_p1, assemble_reaction, assemble_stiffness,
    MixedOperator, SparseOperator,
};
pub(crate) use assembly::element_mass;
pub use linsolve::{conjugate_gradient, solve_spd, BandCholesky, BandMatrix};
pub use mesh::Mesh;

/// `L2` distance between a P1 nodal field and a function, using the
/// six-point degree-4 rule on each cell.
pub fn l2_error<F: Fn(f64, f64) -> f64>(mesh: &Mesh, nodal: &[f64], exact: F) -> f64 {
    const A: f64 = 0.445_948_490_915_965;
    const B: f64 = 0.091_576_213_509_771;
    const WA: f64 = 0.223_381_589_678_011;
    const WB: f64 = 0.109_951_743_655_322;
    let pts: [([f64; 3], f64); 6] = [
        ([A, A, 1.0 - 2.0 * A], WA),
        ([A, 1.0 - 2.0 * A, A], WA),
        ([1.0 - 2.0 * A, A, A], WA),
        ([B, B, 1.0 - 2.0 * B], WB),
        ([B, 1.0 - 2.0 * B, B], WB),
        ([1.0 - 2.0 * B, B, B], WB),
    ];
    let area = mesh.cell_area();
    let nodes = mesh.nodes();
    let mut total = 0.0;
    for cell in mesh.cells() {
        for (bary, w) in &pts {
            let (mut x, mut y, mut v) = (0.0, 0.0, 0.0);
            for k in 0..3 {
                x += bary[k] * nodes[cell[k]][0];
                y += bary[k] * nodes[cell[k]][1];
                v += bary[k] * nodal[cell[k]];
            }
            let e = v - exact(x, y);
            total += w * area * e * e;
        }
    }
    total.sqrt()
}
