//! File formats: ENVI-style cube headers, 16-bit PGM label, class and
//! assignment maps, PPM colorized maps, text palettes and supertoken
//! feature files.

mod envi;
mod netpbm;
mod palette;
mod tokens;

pub use envi::{data_path, header_text, read_cube, write_cube};
pub use netpbm::{
    decode_pgm16, encode_pgm16, encode_ppm, read_assignment, read_class_map, read_label_map, read_label_map_expect,
    write_assignment, write_class_map, write_class_map_ppm, write_label_map,
};
pub use palette::Palette;
pub use tokens::{members_path, read_tokens, write_tokens};
