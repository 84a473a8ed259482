use super::Image;
use crate::error::{Error, Result};

/// Square patches cut from one source image, in raster order of their offsets.
#[derive(Clone, Debug)]
pub struct PatchSet {
    pub patch_size: usize,
    pub stride: usize,
    pub source_id: String,
    pub source_shape: (usize, usize),
    pub offsets: Vec<(usize, usize)>,
    pub patches: Vec<Image>,
}

impl PatchSet {
    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }
}

fn axis_offsets(extent: usize, size: usize, stride: usize) -> Vec<usize> {
    let last = extent - size;
    let mut offsets: Vec<usize> = (0..=last).step_by(stride).collect();
    if *offsets.last().unwrap() != last {
        offsets.push(last);
    }
    offsets
}

/// Cuts `size x size` patches at offsets 0, stride, 2*stride, ... along each
/// axis, plus a final offset snapped to the border so every pixel is covered.
pub fn extract_patches(img: &Image, size: usize, stride: usize) -> Result<PatchSet> {
    extract_patches_from(img, size, stride, "image")
}

pub(crate) fn extract_patches_from(
    img: &Image,
    size: usize,
    stride: usize,
    source_id: &str,
) -> Result<PatchSet> {
    if size == 0 || size > img.height().min(img.width()) {
        return Err(Error::InvalidArgument(format!(
            "patch size {size} exceeds image {}x{}",
            img.height(),
            img.width()
        )));
    }
    if stride == 0 {
        return Err(Error::InvalidArgument("stride must be >= 1".into()));
    }
    let rows = axis_offsets(img.height(), size, stride);
    let cols = axis_offsets(img.width(), size, stride);
    let mut offsets = Vec::with_capacity(rows.len() * cols.len());
    let mut patches = Vec::with_capacity(rows.len() * cols.len());
    for &r in &rows {
        for &c in &cols {
            offsets.push((r, c));
            patches.push(img.crop(r, c, size, size)?);
        }
    }
    Ok(PatchSet {
        patch_size: size,
        stride,
        source_id: source_id.to_string(),
        source_shape: img.shape(),
        offsets,
        patches,
    })
}

impl PatchSet {
    /// Names the source image the patches came from.
    pub fn with_source_id(mut self, id: impl Into<String>) -> Self {
        self.source_id = id.into();
        self
    }
}

/// Puts patches back in place, averaging wherever they overlap.
pub fn reassemble(set: &PatchSet) -> Result<Image> {
    let (h, w) = set.source_shape;
    let peak = set.patches.first().map_or(255.0, |p| p.peak());
    let mut acc = vec![0.0; h * w];
    let mut count = vec![0u32; h * w];
    for (patch, &(r0, c0)) in set.patches.iter().zip(&set.offsets) {
        for r in 0..set.patch_size {
            for c in 0..set.patch_size {
                let idx = (r0 + r) * w + c0 + c;
                acc[idx] += patch.get(r, c);
                count[idx] += 1;
            }
        }
    }
    if count.contains(&0) {
        return Err(Error::InvalidArgument(
            "patches do not cover the image".into(),
        ));
    }
    let data = acc.iter().zip(&count).map(|(a, &n)| a / n as f64).collect();
    Image::new(h, w, data, peak)
}

fn rot90(p: &Image) -> Image {
    let n = p.height();
    let mut out = Image::from_parts(n, n, vec![0.0; n * n], p.peak());
    for i in 0..n {
        for j in 0..n {
            // counter-clockwise
            out.set(i, j, p.get(j, n - 1 - i));
        }
    }
    out
}

fn flip_h(p: &Image) -> Image {
    let n = p.height();
    let mut out = Image::from_parts(n, n, vec![0.0; n * n], p.peak());
    for i in 0..n {
        for j in 0..n {
            out.set(i, j, p.get(i, n - 1 - j));
        }
    }
    out
}

/// The eight dihedral variants: rot0, rot90, rot180, rot270 (counter-clockwise),
/// then each of those followed by a horizontal flip.
pub fn augment8(patch: &Image) -> Result<Vec<Image>> {
    if patch.height() != patch.width() {
        return Err(Error::InvalidArgument(format!(
            "augment8 needs a square patch, got {}x{}",
            patch.height(),
            patch.width()
        )));
    }
    let mut rots = vec![patch.clone()];
    for k in 1..4 {
        rots.push(rot90(&rots[k - 1]));
    }
    let flipped: Vec<Image> = rots.iter().map(flip_h).collect();
    rots.extend(flipped);
    Ok(rots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn counting(h: usize, w: usize) -> Image {
        Image::new(h, w, (0..h * w).map(|v| v as f64).collect(), 255.0).unwrap()
    }

    #[test]
    fn exact_tiling() {
        let set = extract_patches(&counting(4, 4), 2, 2).unwrap();
        assert_eq!(set.len(), 4);
        assert_eq!(set.offsets, vec![(0, 0), (0, 2), (2, 0), (2, 2)]);
        assert_eq!(reassemble(&set).unwrap(), counting(4, 4));
    }

    #[test]
    fn edge_snap() {
        let set = extract_patches(&counting(5, 5), 2, 2).unwrap();
        assert_eq!(set.len(), 9);
        assert_eq!(set.offsets.last(), Some(&(3, 3)));
        assert_eq!(reassemble(&set).unwrap(), counting(5, 5));
    }

    #[test]
    fn whole_image_patch() {
        let img = counting(40, 40);
        let set = extract_patches(&img, 40, 40).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.patches[0], img);
    }

    #[test]
    fn oversize_patch_rejected() {
        assert!(extract_patches(&counting(4, 6), 5, 1).is_err());
        assert!(extract_patches(&counting(4, 6), 2, 0).is_err());
    }

    #[test]
    fn rot90_hand_checked() {
        let p = Image::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
        let v = augment8(&p).unwrap();
        assert_eq!(v[1], Image::from_rows(&[&[2.0, 4.0], &[1.0, 3.0]]).unwrap());
        assert_eq!(v[4], Image::from_rows(&[&[2.0, 1.0], &[4.0, 3.0]]).unwrap());
    }

    #[test]
    fn constant_patch_variants_identical() {
        let p = Image::filled(3, 3, 9.0);
        assert!(augment8(&p).unwrap().iter().all(|q| *q == p));
    }

    #[test]
    fn rot180_is_involution() {
        let p = counting(5, 5);
        let r180 = augment8(&p).unwrap()[2].clone();
        assert_eq!(augment8(&r180).unwrap()[2], p);
    }

    #[test]
    fn non_square_rejected() {
        assert!(augment8(&counting(2, 3)).is_err());
    }

    proptest! {
        #[test]
        fn dihedral_closure(n in 2usize..6, seed in 0u64..1000) {
            let mut rng = crate::rng::Rng::new(seed);
            let p = Image::new(n, n, (0..n * n).map(|_| rng.uniform()).collect(), 1.0).unwrap();
            let variants = augment8(&p).unwrap();
            for v in &variants {
                for w in augment8(v).unwrap() {
                    prop_assert!(variants.contains(&w));
                }
            }
        }

        #[test]
        fn tiling_reassembles(k in 1usize..4, tiles_h in 1usize..4, tiles_w in 1usize..4) {
            let img = counting(k * tiles_h, k * tiles_w);
            if k <= img.height().min(img.width()) {
                let set = extract_patches(&img, k, k).unwrap();
                prop_assert_eq!(reassemble(&set).unwrap(), img);
            }
        }
    }
}
