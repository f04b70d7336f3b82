//! PLY export of a dense cloud at one timestep, colored by class.

use std::io::{self, Write};

use crate::densification::DensePointCloud;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
}

/// Deterministic, well-separated color per class id; class 0 is gray.
pub fn class_color(class_id: u16) -> [u8; 3] {
    if class_id == 0 {
        return [128, 128, 128];
    }
    // Golden-angle hue walk.
    let hue = (class_id as f64 * 137.508) % 360.0;
    let (s, v) = (0.75, 0.95);
    let c = v * s;
    let x = c * (1.0 - ((hue / 60.0) % 2.0 - 1.0).abs());
    let m = v - c;
    let (r, g, b) = match (hue / 60.0) as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let q = |f: f64| ((f + m) * 255.0).round() as u8;
    [q(r), q(g), q(b)]
}

pub fn write_ply<W: Write>(out: &mut W, dense: &DensePointCloud, t: usize, format: PlyFormat) -> io::Result<()> {
    if t >= dense.num_timesteps {
        return Err(io::Error::new(
            io::ErrorKind::InvalidInput,
            format!("timestep {t} out of range (T = {})", dense.num_timesteps),
        ));
    }
    let fmt = match format {
        PlyFormat::Ascii => "ascii",
        PlyFormat::BinaryLittleEndian => "binary_little_endian",
    };
    write!(
        out,
        "ply\nformat {fmt} 1.0\ncomment timestep {t}\nelement vertex {}\n\
         property float x\nproperty float y\nproperty float z\n\
         property uchar red\nproperty uchar green\nproperty uchar blue\n\
         property ushort class_id\nend_header\n",
        dense.num_points
    )?;
    for m in 0..dense.num_points {
        let p = dense.position(m, t);
        let class = dense.class_ids[m];
        let [r, g, b] = class_color(class);
        match format {
            PlyFormat::Ascii => writeln!(out, "{} {} {} {r} {g} {b} {class}", p.x as f32, p.y as f32, p.z as f32)?,
            PlyFormat::BinaryLittleEndian => {
                for v in [p.x as f32, p.y as f32, p.z as f32] {
                    out.write_all(&v.to_le_bytes())?;
                }
                out.write_all(&[r, g, b])?;
                out.write_all(&class.to_le_bytes())?;
            }
        }
    }
    Ok(())
}
