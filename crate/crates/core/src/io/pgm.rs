//! Binary PGM (P5) and map-metadata YAML output for occupancy grids.
//! Loading lives in [`crate::occupancy`] next to the grid semantics.

use std::path::Path;

use crate::error::{Error, Result};
use crate::occupancy::{Cell, OccupancyGrid};

pub fn write_pgm(path: &Path, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    assert_eq!(pixels.len(), width * height);
    let mut bytes = format!("P5\n{width} {height}\n255\n").into_bytes();
    bytes.extend_from_slice(pixels);
    std::fs::write(path, bytes).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Write `<stem>.pgm` and `<stem>.yaml` in the map-server convention:
/// free 254, occupied 0, unknown 205; PGM row 0 at maximum world y.
pub fn write_occupancy_pgm_yaml(stem: &Path, grid: &OccupancyGrid) -> Result<()> {
    let pgm_path = stem.with_extension("pgm");
    let yaml_path = stem.with_extension("yaml");
    let mut pixels = vec![0u8; grid.width * grid.height];
    for row in 0..grid.height {
        for col in 0..grid.width {
            let v = match grid.cells[row * grid.width + col] {
                Cell::Free => 254u8,
                Cell::Occupied => 0,
                Cell::Unknown => 205,
            };
            // Flip: grid row 0 is minimum y, PGM row 0 is the top.
            pixels[(grid.height - 1 - row) * grid.width + col] = v;
        }
    }
    write_pgm(&pgm_path, grid.width, grid.height, &pixels)?;
    let image_name = pgm_path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "map.pgm".into());
    let yaml = format!(
        "image: {image_name}\nresolution: {}\norigin: [{}, {}, 0.0]\nnegate: 0\noccupied_thresh: {}\nfree_thresh: {}\n",
        grid.resolution, grid.origin[0], grid.origin[1], grid.occ_thresh, grid.free_thresh
    );
    std::fs::write(&yaml_path, yaml).map_err(|e| Error::io(yaml_path.display().to_string(), e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::occupancy::load_occupancy;

    #[test]
    fn occupancy_write_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cells = vec![
            Cell::Free,
            Cell::Occupied,
            Cell::Unknown,
            Cell::Free,
            Cell::Free,
            Cell::Occupied,
        ];
        let grid = OccupancyGrid::new(0.25, [1.5, -2.0], 3, 2, cells).unwrap();
        let stem = dir.path().join("map");
        write_occupancy_pgm_yaml(&stem, &grid).unwrap();
        let back = load_occupancy(&stem.with_extension("pgm"), &stem.with_extension("yaml"))
            .unwrap();
        assert_eq!(back.width, 3);
        assert_eq!(back.height, 2);
        assert_eq!(back.resolution, 0.25);
        assert_eq!(back.origin, [1.5, -2.0]);
        assert_eq!(back.cells, grid.cells);
    }
}
