//! Compares analytic classifier gradients with central finite differences.

use supertoken::classifier::{grad_check, ClassifierParams, ModelConfig};
use supertoken::cluster::SupertokenSet;
use supertoken::labels::SoftLabelMatrix;
use supertoken::rng::SeededRng;

fn main() -> anyhow::Result<()> {
    let (m, c, k) = (16, 32, 5);
    let mut rng = SeededRng::new(3);
    let tokens = SupertokenSet::new(m, c, (0..m * c).map(|_| rng.normal()).collect(), vec![1; m])?;
    let mut rows = Vec::new();
    for _ in 0..m {
        let w: Vec<f64> = (0..k).map(|_| rng.uniform()).collect();
        let s: f64 = w.iter().sum();
        rows.extend(w.iter().map(|v| v / s));
    }
    let labels = SoftLabelMatrix::new(m, k, rows, vec![true; m])?;
    let params = ClassifierParams::init(ModelConfig::new(c, k), 1)?;
    for h in [1e-4, 1e-5, 1e-6] {
        let r = grad_check(&params, &tokens, &labels, 400, h, 1e-8, 9)?;
        println!(
            "h {h:.0e}: {} coords, max rel err {:.3e}, max abs err {:.3e}",
            r.coords.len(),
            r.max_rel_error,
            r.max_abs_error
        );
    }
    Ok(())
}
