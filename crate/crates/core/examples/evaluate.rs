//! Confusion matrix and summary metrics for a hand-made prediction.

use supertoken::cube::{ClassMap, LabelMap, IGNORE};
use supertoken::eval::{confusion, metrics};

fn main() -> anyhow::Result<()> {
    let gt = LabelMap::new(3, 4, vec![0, 0, 1, 1, 0, 0, 1, 1, 2, 2, IGNORE, IGNORE])?;
    let pred = ClassMap::new(3, 4, vec![0, 0, 1, 0, 0, 1, 1, 1, 2, 2, 2, 0])?;
    let cm = confusion(&pred, &gt, 3)?;
    print!("{}", cm.to_csv());
    let m = metrics(&cm)?;
    print!("{}", m.to_csv());
    Ok(())
}
