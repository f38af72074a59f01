use std::io::Write;

use super::{Grid, NumericsError, Snapshot};

/// Writes `(t, x, u)` rows for every snapshot, one row per grid point.
pub fn write_snapshots_csv<W: Write>(
    writer: W,
    grid: &Grid,
    snapshots: &[Snapshot],
) -> Result<(), NumericsError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t", "x", "u"])?;
    for snap in snapshots {
        snap.field.check_grid(grid)?;
        for (x, u) in grid.coords().iter().zip(snap.field.values()) {
            w.write_record([snap.t.to_string(), x.to_string(), u.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Field;

    #[test]
    fn one_row_per_point() {
        let g = Grid::unit(5).unwrap();
        let snaps = vec![Snapshot {
            t: 0.5,
            field: Field::constant(&g, 2.0),
        }];
        let mut buf = Vec::new();
        write_snapshots_csv(&mut buf, &g, &snaps).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,x,u");
        assert_eq!(lines.len(), 6);
        assert_eq!(lines[2], "0.5,0.2,2");
    }
}
