//! Surface writers: CSV, 16-bit binary PGM and Wavefront OBJ.

use std::io::{self, Write};

use clap::ValueEnum;

use crate::bilinear::SampledSurface;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ExportFormat {
    Csv,
    Pgm16,
    Obj,
}

pub fn export_surface(surface: &SampledSurface, format: ExportFormat, out: &mut impl Write) -> io::Result<()> {
    match format {
        ExportFormat::Csv => write_csv(surface, out),
        ExportFormat::Pgm16 => write_pgm16(surface, out),
        ExportFormat::Obj => write_obj(surface, out),
    }
}

/// `x,y,f` rows, `x` index outermost. `Display` for `f64` prints the
/// shortest string that parses back to the same value.
pub fn write_csv(surface: &SampledSurface, out: &mut impl Write) -> io::Result<()> {
    let side = surface.side();
    writeln!(out, "x,y,f")?;
    for kx in 0..=side {
        let x = surface.coord(kx);
        for ly in 0..=side {
            writeln!(out, "{},{},{}", x, surface.coord(ly), surface.get(kx, ly))?;
        }
    }
    Ok(())
}

/// Binary P5, maxval 65535, big-endian samples, first row at `y = 1`.
/// A constant surface is written as mid-gray.
pub fn write_pgm16(surface: &SampledSurface, out: &mut impl Write) -> io::Result<()> {
    let side = surface.side();
    let (lo, hi) = surface.min_max();
    let span = hi - lo;
    write!(out, "P5\n# min={lo} max={hi}")?;
    if span == 0.0 {
        write!(out, " constant surface written as mid-gray")?;
    }
    write!(out, "\n{} {}\n65535\n", side + 1, side + 1)?;
    let mut buf = Vec::with_capacity(2 * (side + 1) * (side + 1));
    for ly in (0..=side).rev() {
        for kx in 0..=side {
            let level = if span == 0.0 {
                32768
            } else {
                ((surface.get(kx, ly) - lo) / span * 65535.0).round() as u16
            };
            buf.extend_from_slice(&level.to_be_bytes());
        }
    }
    out.write_all(&buf)
}

/// `(side+1)²` vertices and two counterclockwise triangles per square.
pub fn write_obj(surface: &SampledSurface, out: &mut impl Write) -> io::Result<()> {
    let side = surface.side();
    let index = |kx: usize, ly: usize| kx * (side + 1) + ly + 1;
    for kx in 0..=side {
        for ly in 0..=side {
            writeln!(out, "v {} {} {}", surface.coord(kx), surface.coord(ly), surface.get(kx, ly))?;
        }
    }
    for kx in 0..side {
        for ly in 0..side {
            let (a, b, c, d) = (index(kx, ly), index(kx + 1, ly), index(kx + 1, ly + 1), index(kx, ly + 1));
            writeln!(out, "f {a} {b} {c}")?;
            writeln!(out, "f {a} {c} {d}")?;
        }
    }
    Ok(())
}
