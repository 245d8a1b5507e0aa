//! Supertoken features as a `count × 1 × dim` cube plus a `.members` text
//! sidecar holding one pixel count per line.

use std::fs;
use std::path::{Path, PathBuf};

use crate::cluster::SupertokenSet;
use crate::cube::HsiCube;
use crate::error::{Error, Result};

use super::{read_cube, write_cube};

pub fn members_path(header_path: &Path) -> PathBuf {
    header_path.with_extension("members")
}

pub fn write_tokens(tokens: &SupertokenSet, header_path: &Path) -> Result<()> {
    let cube = HsiCube::from_pixel_spectra(
        tokens.count,
        1,
        &(0..tokens.count).map(|j| tokens.token(j).to_vec()).collect::<Vec<_>>(),
    )?;
    write_cube(&cube, header_path)?;
    let text: String = tokens.member_counts.iter().map(|c| format!("{c}\n")).collect();
    let path = members_path(header_path);
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

pub fn read_tokens(header_path: &Path) -> Result<SupertokenSet> {
    let cube = read_cube(header_path)?;
    if cube.width() != 1 {
        return Err(Error::Header {
            path: header_path.to_path_buf(),
            msg: format!("token file must have width 1, found {}", cube.width()),
        });
    }
    let path = members_path(header_path);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let counts = text
        .lines()
        .map(|l| l.trim().parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let features = (0..cube.height()).flat_map(|j| cube.spectrum(j)).collect();
    SupertokenSet::new(cube.height(), cube.bands(), features, counts)
}
