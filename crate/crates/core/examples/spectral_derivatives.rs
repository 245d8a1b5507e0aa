//! First and second spectral derivatives of a smooth synthetic spectrum.

use supertoken::cube::HsiCube;
use supertoken::derivative::{first_derivative, second_derivative};

fn main() -> anyhow::Result<()> {
    // one pixel, spectrum b² so the second difference is constant 2·step²
    let bands = 10;
    let cube = HsiCube::new(1, 1, bands, (0..bands).map(|b| (b * b) as f64).collect())?;
    for step in [1, 2] {
        let d1 = first_derivative(&cube, step)?;
        let d2 = second_derivative(&cube, step)?;
        println!("step {step}");
        println!("  spectrum   {:?}", cube.data());
        println!("  first      {:?}", d1.data());
        println!("  second     {:?}", d2.data());
    }
    Ok(())
}
