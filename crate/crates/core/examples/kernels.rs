//! Evaluating the ANOVA and homogeneous polynomial kernels on a sparse sample.

use polyfm::data::Sample;
use polyfm::kernels::{anova_fast, anova_recursive, homogeneous, KernelKind};
use polyfm::oracle::brute_anova;

fn main() {
    let p = [1.0, 2.0, 3.0, 4.0];
    let x = Sample::new([(0, 1.0), (1, 1.0), (2, 1.0), (3, 1.0)], 4).unwrap();

    for m in 1..=4 {
        let recursive = anova_recursive(&p, x.view(), m).unwrap();
        let brute = brute_anova(&p, &x.view().to_dense(), m).unwrap();
        println!("A^{m}(p, x) = {recursive} (enumeration: {brute})");
    }
    println!("A^2 via power sums = {}", anova_fast(&p, x.view(), 2).unwrap());
    println!("A^3 via power sums = {}", anova_fast(&p, x.view(), 3).unwrap());

    // With replacement vs without: <p, x>^2 also counts the squares p_j^2 x_j^2.
    let h2 = homogeneous(&p, x.view(), 2).unwrap();
    let a2 = KernelKind::Anova(2).eval(&p, x.view()).unwrap();
    let squares: f64 = p.iter().map(|v| v * v).sum();
    println!("H^2 = {h2} = 2 A^2 + sum p_j^2 = {}", 2.0 * a2 + squares);
}
