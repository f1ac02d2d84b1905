//! Agatston coronary-artery-calcium scoring.
//!
//! High-density voxels (>= 130 HU) inside the coronary-artery mask are
//! grouped into 8-connected components per axial slice. Components smaller
//! than 1 mm^2 are discarded; each remaining lesion scores
//! `area_mm2 * weight`, with the weight set by the lesion's peak attenuation:
//! 1 for 130-199 HU, 2 for 200-299 HU, 3 for 300-399 HU, 4 for >= 400 HU.
//! The total is the sum over all slices and lesions. Components are never
//! merged across slices.

use crate::dataio::{Mask, Volume};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Attenuation floor for candidate voxels, in HU.
pub const CANDIDATE_THRESHOLD_HU: f64 = 130.0;

/// Minimum in-plane lesion area in mm^2 (strictly smaller components are
/// excluded; exactly 1 mm^2 is kept).
pub const MIN_LESION_AREA_MM2: f64 = 1.0;

/// One scored lesion: an 8-connected in-plane component of candidate voxels.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LesionComponent {
    pub slice_index: usize,
    pub voxel_count: usize,
    pub area_mm2: f64,
    pub peak_hu: f64,
    pub weight: u32,
    pub score: f64,
}

/// Per-lesion rows plus the summed Agatston score.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CacReport {
    pub lesions: Vec<LesionComponent>,
    pub total_score: f64,
}

/// Voxels that are inside the artery mask and at or above 130 HU.
pub fn candidate_mask(volume: &Volume, artery_mask: &Mask) -> Result<Mask> {
    artery_mask.check_compatible(volume)?;
    let voxels = volume
        .voxels
        .iter()
        .zip(&artery_mask.voxels)
        .map(|(&hu, &inside)| inside && hu >= CANDIDATE_THRESHOLD_HU)
        .collect();
    Mask::new(artery_mask.dims, artery_mask.spacing_mm, voxels)
}

/// Label 8-connected components of a 2-D binary grid (row-major, x fastest).
///
/// Returns per-pixel labels (0 = background) and the number of components.
/// Labels are assigned in raster order of each component's first-encountered
/// voxel, so the partition and the numbering are deterministic.
pub fn label_components_2d(mask: &[bool], nx: usize, ny: usize) -> (Vec<u32>, usize) {
    assert_eq!(mask.len(), nx * ny, "grid size mismatch");
    // Two-pass union-find over provisional labels.
    let mut provisional = vec![0u32; mask.len()];
    let mut parent: Vec<u32> = vec![0]; // parent[0] unused (background)

    fn find(parent: &mut [u32], mut l: u32) -> u32 {
        while parent[l as usize] != l {
            parent[l as usize] = parent[parent[l as usize] as usize];
            l = parent[l as usize];
        }
        l
    }

    for y in 0..ny {
        for x in 0..nx {
            let i = x + nx * y;
            if !mask[i] {
                continue;
            }
            // Previously-scanned 8-neighbours: W, NW, N, NE.
            let mut neighbour_labels = [0u32; 4];
            let mut n_found = 0;
            if x > 0 && mask[i - 1] {
                neighbour_labels[n_found] = provisional[i - 1];
                n_found += 1;
            }
            if y > 0 {
                let row = i - nx;
                if x > 0 && mask[row - 1] {
                    neighbour_labels[n_found] = provisional[row - 1];
                    n_found += 1;
                }
                if mask[row] {
                    neighbour_labels[n_found] = provisional[row];
                    n_found += 1;
                }
                if x + 1 < nx && mask[row + 1] {
                    neighbour_labels[n_found] = provisional[row + 1];
                    n_found += 1;
                }
            }
            if n_found == 0 {
                let l = parent.len() as u32;
                parent.push(l);
                provisional[i] = l;
            } else {
                let mut root = find(&mut parent, neighbour_labels[0]);
                for &nl in &neighbour_labels[1..n_found] {
                    let r = find(&mut parent, nl);
                    if r != root {
                        // Union by smaller root to keep the forest shallow-ish.
                        if r < root {
                            parent[root as usize] = r;
                            root = r;
                        } else {
                            parent[r as usize] = root;
                        }
                    }
                }
                provisional[i] = root;
            }
        }
    }

    // Second pass: compress and renumber in raster order of first occurrence.
    let mut remap = vec![0u32; parent.len()];
    let mut labels = vec![0u32; mask.len()];
    let mut next = 0u32;
    for i in 0..mask.len() {
        if !mask[i] {
            continue;
        }
        let root = find(&mut parent, provisional[i]);
        if remap[root as usize] == 0 {
            next += 1;
            remap[root as usize] = next;
        }
        labels[i] = remap[root as usize];
    }
    (labels, next as usize)
}

/// Density weight for a lesion's peak attenuation. Bin edges 200/300/400
/// belong to the upper bin.
pub fn density_weight(peak_hu: f64) -> Result<u32> {
    if !(peak_hu >= CANDIDATE_THRESHOLD_HU) {
        return Err(Error::BelowScoringFloor(peak_hu));
    }
    Ok(if peak_hu >= 400.0 {
        4
    } else if peak_hu >= 300.0 {
        3
    } else if peak_hu >= 200.0 {
        2
    } else {
        1
    })
}

/// Score a volume against a coronary-artery mask.
pub fn agatston(volume: &Volume, artery_mask: &Mask) -> Result<CacReport> {
    let candidates = candidate_mask(volume, artery_mask)?;
    let [nx, ny, nz] = volume.dims;
    let pixel_area = volume.spacing_mm[0] * volume.spacing_mm[1];

    let mut lesions = Vec::new();
    let mut total_score = 0.0;
    for z in 0..nz {
        let slice_start = nx * ny * z;
        let slice = &candidates.voxels[slice_start..slice_start + nx * ny];
        let (labels, n_components) = label_components_2d(slice, nx, ny);
        if n_components == 0 {
            continue;
        }
        let mut counts = vec![0usize; n_components];
        let mut peaks = vec![f64::NEG_INFINITY; n_components];
        for (idx, &label) in labels.iter().enumerate() {
            if label == 0 {
                continue;
            }
            let c = (label - 1) as usize;
            counts[c] += 1;
            let hu = volume.voxels[slice_start + idx];
            if hu > peaks[c] {
                peaks[c] = hu;
            }
        }
        for c in 0..n_components {
            let area_mm2 = counts[c] as f64 * pixel_area;
            if area_mm2 < MIN_LESION_AREA_MM2 {
                continue;
            }
            let weight = density_weight(peaks[c])?;
            let score = area_mm2 * weight as f64;
            total_score += score;
            lesions.push(LesionComponent {
                slice_index: z,
                voxel_count: counts[c],
                area_mm2,
                peak_hu: peaks[c],
                weight,
                score,
            });
        }
    }
    Ok(CacReport {
        lesions,
        total_score,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::VoxelType;

    fn volume(dims: [usize; 3], spacing: [f64; 3], voxels: Vec<f64>) -> Volume {
        Volume::with_dtype(dims, spacing, voxels, VoxelType::F32).unwrap()
    }

    fn full_mask(dims: [usize; 3], spacing: [f64; 3]) -> Mask {
        Mask::new(dims, spacing, vec![true; dims[0] * dims[1] * dims[2]]).unwrap()
    }

    #[test]
    fn candidate_threshold_is_inclusive() {
        let dims = [3, 1, 1];
        let sp = [1.0, 1.0, 1.0];
        let v = volume(dims, sp, vec![100.0, 130.0, 129.9]);
        let c = candidate_mask(&v, &full_mask(dims, sp)).unwrap();
        assert_eq!(c.voxels, vec![false, true, false]);
    }

    #[test]
    fn candidate_grid_mismatch() {
        let v = volume([2, 1, 1], [1.0, 1.0, 1.0], vec![200.0, 200.0]);
        let m = Mask::new([3, 1, 1], [1.0, 1.0, 1.0], vec![true; 3]).unwrap();
        assert!(matches!(
            candidate_mask(&v, &m).unwrap_err(),
            Error::GridMismatch(_)
        ));
    }

    #[test]
    fn diagonal_voxels_are_one_component() {
        let mask = [
            true, false, //
            false, true,
        ];
        let (labels, n) = label_components_2d(&mask, 2, 2);
        assert_eq!(n, 1);
        assert_eq!(labels, vec![1, 0, 0, 1]);
    }

    #[test]
    fn separated_voxels_are_two_components() {
        let mask = [true, false, true];
        let (labels, n) = label_components_2d(&mask, 3, 1);
        assert_eq!(n, 2);
        assert_eq!(labels, vec![1, 0, 2]);
    }

    #[test]
    fn labeling_matches_flood_fill_oracle() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for _ in 0..20 {
            let (nx, ny) = (64, 64);
            let mask: Vec<bool> = (0..nx * ny).map(|_| rng.random::<f64>() < 0.4).collect();
            let (labels, n) = label_components_2d(&mask, nx, ny);
            let (oracle_labels, oracle_n) = flood_fill_oracle(&mask, nx, ny);
            assert_eq!(n, oracle_n);
            assert_eq!(labels, oracle_labels);
        }
    }

    /// BFS flood-fill reference labeling, raster order of seeds.
    fn flood_fill_oracle(mask: &[bool], nx: usize, ny: usize) -> (Vec<u32>, usize) {
        let mut labels = vec![0u32; mask.len()];
        let mut next = 0u32;
        for start in 0..mask.len() {
            if !mask[start] || labels[start] != 0 {
                continue;
            }
            next += 1;
            let mut queue = std::collections::VecDeque::new();
            labels[start] = next;
            queue.push_back(start);
            while let Some(i) = queue.pop_front() {
                let (x, y) = (i % nx, i / nx);
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        if dx == 0 && dy == 0 {
                            continue;
                        }
                        let (xx, yy) = (x as i64 + dx, y as i64 + dy);
                        if xx < 0 || yy < 0 || xx >= nx as i64 || yy >= ny as i64 {
                            continue;
                        }
                        let j = xx as usize + nx * yy as usize;
                        if mask[j] && labels[j] == 0 {
                            labels[j] = next;
                            queue.push_back(j);
                        }
                    }
                }
            }
        }
        (labels, next as usize)
    }

    #[test]
    fn weight_bins() {
        assert_eq!(density_weight(130.0).unwrap(), 1);
        assert_eq!(density_weight(150.0).unwrap(), 1);
        assert_eq!(density_weight(199.9).unwrap(), 1);
        assert_eq!(density_weight(200.0).unwrap(), 2);
        assert_eq!(density_weight(299.0).unwrap(), 2);
        assert_eq!(density_weight(300.0).unwrap(), 3);
        assert_eq!(density_weight(399.0).unwrap(), 3);
        assert_eq!(density_weight(400.0).unwrap(), 4);
        assert_eq!(density_weight(1200.0).unwrap(), 4);
        assert!(matches!(
            density_weight(129.0).unwrap_err(),
            Error::BelowScoringFloor(_)
        ));
    }

    #[test]
    fn empty_mask_scores_zero() {
        let dims = [4, 4, 2];
        let sp = [1.0, 1.0, 1.0];
        let v = volume(dims, sp, vec![500.0; 32]);
        let m = Mask::new(dims, sp, vec![false; 32]).unwrap();
        let r = agatston(&v, &m).unwrap();
        assert!(r.lesions.is_empty());
        assert_eq!(r.total_score, 0.0);
    }

    #[test]
    fn four_voxel_lesion_at_320_hu() {
        // One slice, 1.0 x 1.0 mm pixels, 2x2 lesion with peak 320 HU:
        // 4 mm^2 * weight 3 = 12.0.
        let dims = [4, 4, 1];
        let sp = [1.0, 1.0, 1.0];
        let mut voxels = vec![-50.0; 16];
        for (x, y) in [(1, 1), (2, 1), (1, 2), (2, 2)] {
            voxels[x + 4 * y] = 320.0;
        }
        let v = volume(dims, sp, voxels);
        let r = agatston(&v, &full_mask(dims, sp)).unwrap();
        assert_eq!(r.lesions.len(), 1);
        assert_eq!(r.lesions[0].voxel_count, 4);
        assert_eq!(r.lesions[0].weight, 3);
        assert_eq!(r.total_score, 12.0);
    }

    #[test]
    fn sub_millimetre_lesion_excluded() {
        // A single voxel at 0.8 x 0.8 mm covers 0.64 mm^2 < 1 mm^2.
        let dims = [3, 3, 1];
        let sp = [0.8, 0.8, 1.0];
        let mut voxels = vec![-50.0; 9];
        voxels[4] = 500.0;
        let v = volume(dims, sp, voxels);
        let r = agatston(&v, &full_mask(dims, sp)).unwrap();
        assert!(r.lesions.is_empty());
        assert_eq!(r.total_score, 0.0);
    }

    #[test]
    fn slices_are_additive() {
        // Two slices, each with a 2x1 lesion at 250 HU and 1.5 x 1.0 mm pixels:
        // area 3 mm^2, weight 2, score 6 each.
        let dims = [4, 2, 2];
        let sp = [1.5, 1.0, 1.0];
        let mut voxels = vec![-50.0; 16];
        for z in 0..2 {
            voxels[0 + 4 * (0 + 2 * z)] = 250.0;
            voxels[1 + 4 * (0 + 2 * z)] = 250.0;
        }
        let v = volume(dims, sp, voxels);
        let r = agatston(&v, &full_mask(dims, sp)).unwrap();
        assert_eq!(r.lesions.len(), 2);
        assert_eq!(r.total_score, 12.0);
        assert_eq!(r.lesions[0].slice_index, 0);
        assert_eq!(r.lesions[1].slice_index, 1);
    }
}
