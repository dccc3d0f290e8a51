//! Grayscale rasters, dataset ingestion, pixel codes, neighborhoods and
//! pixel-pair weights.
//!
//! Coordinates are `(x, y)` with `x` indexing rows and `y` indexing columns,
//! both zero-based. Under that convention the pixel code `c = W*x + y` is
//! exactly the row-major storage index, a bijection onto `[0, W*H)`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::{Error, Result};

/// A rectangular 8-bit grayscale raster. Immutable once constructed.
#[derive(Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

/// Zero-based pixel position: `x` is the row, `y` the column.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PixelCoord {
    pub x: u32,
    pub y: u32,
}

impl PixelCoord {
    pub fn new(x: u32, y: u32) -> Self {
        PixelCoord { x, y }
    }
}

impl std::fmt::Debug for GrayImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "GrayImage({}x{})", self.width, self.height)
    }
}

/// Ring offsets in clockwise order starting at north, preceded by the pixel
/// itself. `(dx, dy)` are row/column deltas.
pub(crate) const NEIGHBOR_OFFSETS: [(i64, i64); 9] = [
    (0, 0),   // self
    (-1, 0),  // N
    (-1, 1),  // NE
    (0, 1),   // E
    (1, 1),   // SE
    (1, 0),   // S
    (1, -1),  // SW
    (0, -1),  // W
    (-1, -1), // NW
];

impl GrayImage {
    /// Builds an image from row-major intensities.
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        if width < 2 || height < 2 {
            return Err(Error::Invalid(format!(
                "image is {width}x{height}; walks need at least 2x2"
            )));
        }
        let expected = width as usize * height as usize;
        if data.len() != expected {
            return Err(Error::Invalid(format!(
                "intensity buffer has {} values, expected {}x{} = {}",
                data.len(),
                width,
                height,
                expected
            )));
        }
        Ok(GrayImage {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Total pixel count `W*H`.
    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn in_bounds(&self, p: PixelCoord) -> bool {
        p.x < self.height && p.y < self.width
    }

    pub fn intensity(&self, p: PixelCoord) -> u8 {
        self.data[self.code_unchecked(p)]
    }

    pub fn intensity_at_code(&self, code: usize) -> u8 {
        self.data[code]
    }

    pub(crate) fn code_unchecked(&self, p: PixelCoord) -> usize {
        p.x as usize * self.width as usize + p.y as usize
    }

    /// Inverse of the pixel code.
    pub fn coord_of_code(&self, code: usize) -> PixelCoord {
        PixelCoord {
            x: (code / self.width as usize) as u32,
            y: (code % self.width as usize) as u32,
        }
    }

    pub(crate) fn check_bounds(&self, p: PixelCoord) -> Result<()> {
        if self.in_bounds(p) {
            Ok(())
        } else {
            Err(Error::Invalid(format!(
                "pixel ({}, {}) is outside a {}x{} image",
                p.x, p.y, self.width, self.height
            )))
        }
    }

    /// In-bounds neighbors of `p` in walker order: `p` itself first, then the
    /// 8-connected ring clockwise starting at north.
    pub(crate) fn neighbor_iter(&self, p: PixelCoord) -> impl Iterator<Item = PixelCoord> + '_ {
        let (h, w) = (self.height as i64, self.width as i64);
        NEIGHBOR_OFFSETS.iter().filter_map(move |&(dx, dy)| {
            let nx = p.x as i64 + dx;
            let ny = p.y as i64 + dy;
            (nx >= 0 && nx < h && ny >= 0 && ny < w).then_some(PixelCoord {
                x: nx as u32,
                y: ny as u32,
            })
        })
    }
}

/// Row-major code `c = W*x + y` of a pixel (Euclidean division inverse of
/// `coord_of_code`).
pub fn pixel_code(p: PixelCoord, image: &GrayImage) -> Result<usize> {
    image.check_bounds(p)?;
    Ok(image.code_unchecked(p))
}

/// `p` itself plus its in-bounds 8-connected ring, clockwise from north.
pub fn neighbors(p: PixelCoord, image: &GrayImage) -> Result<Vec<PixelCoord>> {
    image.check_bounds(p)?;
    Ok(image.neighbor_iter(p).collect())
}

/// Absolute intensity difference between two pixels.
pub fn weight(i: PixelCoord, j: PixelCoord, image: &GrayImage) -> Result<u8> {
    image.check_bounds(i)?;
    image.check_bounds(j)?;
    Ok(image.intensity(i).abs_diff(image.intensity(j)))
}

/// Loads an 8-bit grayscale image from a PGM (P5) or PNG file.
///
/// Color PNGs are converted with integer luma `(299R + 587G + 114B) / 1000`,
/// rounded, so the result is bit-identical on every platform.
pub fn load_image(path: &Path) -> Result<GrayImage> {
    let dynimg = image::open(path)
        .map_err(|e| Error::Image(format!("{}: {}", path.display(), e)))?;
    let (w, h) = (dynimg.width(), dynimg.height());
    let data = match dynimg {
        image::DynamicImage::ImageLuma8(img) => img.into_raw(),
        image::DynamicImage::ImageLumaA8(img) => {
            img.pixels().map(|p| p.0[0]).collect()
        }
        image::DynamicImage::ImageRgb8(img) => {
            img.pixels().map(|p| luma(p.0[0], p.0[1], p.0[2])).collect()
        }
        image::DynamicImage::ImageRgba8(img) => {
            img.pixels().map(|p| luma(p.0[0], p.0[1], p.0[2])).collect()
        }
        other => {
            return Err(Error::Image(format!(
                "{}: unsupported bit depth or layout ({:?}); expected 8-bit grayscale or RGB",
                path.display(),
                other.color()
            )))
        }
    };
    GrayImage::new(w, h, data)
        .map_err(|e| Error::Image(format!("{}: {}", path.display(), e)))
}

fn luma(r: u8, g: u8, b: u8) -> u8 {
    ((299 * r as u32 + 587 * g as u32 + 114 * b as u32 + 500) / 1000) as u8
}

/// Writes an 8-bit binary PGM (P5). The header layout is fixed so output
/// files are byte-identical across platforms.
pub fn write_pgm(path: &Path, width: u32, height: u32, data: &[u8]) -> Result<()> {
    debug_assert_eq!(data.len(), width as usize * height as usize);
    let mut out = Vec::with_capacity(data.len() + 32);
    write!(out, "P5\n{width} {height}\n255\n").expect("write to vec");
    out.extend_from_slice(data);
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// A sample of a labeled image collection.
#[derive(Clone, Debug)]
pub struct DatasetSample {
    /// Index into [`LabeledDataset::classes`].
    pub class: usize,
    /// File stem of the source image.
    pub id: String,
    pub image: GrayImage,
}

/// Images grouped by class, one directory per class on disk.
#[derive(Clone, Debug)]
pub struct LabeledDataset {
    pub classes: Vec<String>,
    pub samples: Vec<DatasetSample>,
}

impl LabeledDataset {
    pub fn class_count(&self) -> usize {
        self.classes.len()
    }
}

fn is_image_file(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()),
        Some(ext) if ext.eq_ignore_ascii_case("pgm") || ext.eq_ignore_ascii_case("png")
    )
}

/// Loads `root/<class>/<sample>.{pgm,png}` into memory.
///
/// Classes are sorted lexicographically and samples by filename, so the
/// ordering is stable across runs and platforms.
pub fn load_dataset(root: &Path) -> Result<LabeledDataset> {
    let mut class_dirs: Vec<PathBuf> = fs::read_dir(root)
        .map_err(|e| Error::io(root, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    class_dirs.sort_by_key(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()));
    if class_dirs.is_empty() {
        return Err(Error::Invalid(format!(
            "no class directories under {}",
            root.display()
        )));
    }

    let mut classes = Vec::with_capacity(class_dirs.len());
    let mut samples = Vec::new();
    let mut unreadable = Vec::new();
    for (class_idx, dir) in class_dirs.iter().enumerate() {
        let class_name = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let mut files: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && is_image_file(p))
            .collect();
        files.sort_by_key(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()));
        if files.is_empty() {
            return Err(Error::Invalid(format!(
                "class directory {} contains no image files",
                dir.display()
            )));
        }
        for file in files {
            match load_image(&file) {
                Ok(image) => samples.push(DatasetSample {
                    class: class_idx,
                    id: file
                        .file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_default(),
                    image,
                }),
                Err(e) => unreadable.push(format!("{e}")),
            }
        }
        classes.push(class_name);
    }
    if !unreadable.is_empty() {
        return Err(Error::Image(format!(
            "{} unreadable image file(s):\n  {}",
            unreadable.len(),
            unreadable.join("\n  ")
        )));
    }
    Ok(LabeledDataset { classes, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn img(width: u32, height: u32, data: Vec<u8>) -> GrayImage {
        GrayImage::new(width, height, data).unwrap()
    }

    #[test]
    fn rejects_degenerate_dimensions() {
        assert!(GrayImage::new(1, 5, vec![0; 5]).is_err());
        assert!(GrayImage::new(5, 1, vec![0; 5]).is_err());
        assert!(GrayImage::new(2, 2, vec![0; 3]).is_err());
    }

    #[test]
    fn pixel_code_matches_row_major_index() {
        let im = img(5, 5, vec![0; 25]);
        assert_eq!(pixel_code(PixelCoord::new(2, 3), &im).unwrap(), 13);
        assert_eq!(pixel_code(PixelCoord::new(0, 0), &im).unwrap(), 0);
        let big = img(200, 200, vec![0; 40000]);
        assert_eq!(pixel_code(PixelCoord::new(199, 199), &big).unwrap(), 39999);
        assert!(pixel_code(PixelCoord::new(5, 0), &im).is_err());
    }

    #[test]
    fn neighbors_interior_corner_edge() {
        let im = img(5, 5, vec![0; 25]);
        let interior = neighbors(PixelCoord::new(2, 2), &im).unwrap();
        assert_eq!(interior.len(), 9);
        assert_eq!(interior[0], PixelCoord::new(2, 2));
        assert_eq!(interior[1], PixelCoord::new(1, 2)); // N
        assert_eq!(interior[2], PixelCoord::new(1, 3)); // NE

        let corner = neighbors(PixelCoord::new(0, 0), &im).unwrap();
        assert_eq!(
            corner,
            vec![
                PixelCoord::new(0, 0),
                PixelCoord::new(0, 1), // E
                PixelCoord::new(1, 1), // SE
                PixelCoord::new(1, 0), // S
            ]
        );

        let edge = neighbors(PixelCoord::new(0, 2), &im).unwrap();
        assert_eq!(edge.len(), 6);
        assert_eq!(edge[0], PixelCoord::new(0, 2));
        assert_eq!(
            &edge[1..],
            &[
                PixelCoord::new(0, 3), // E
                PixelCoord::new(1, 3), // SE
                PixelCoord::new(1, 2), // S
                PixelCoord::new(1, 1), // SW
                PixelCoord::new(0, 1), // W
            ]
        );
    }

    #[test]
    fn weight_is_absolute_difference() {
        let im = img(2, 2, vec![100, 100, 3, 255]);
        let a = PixelCoord::new(0, 0);
        let b = PixelCoord::new(0, 1);
        let c = PixelCoord::new(1, 0);
        let d = PixelCoord::new(1, 1);
        assert_eq!(weight(a, b, &im).unwrap(), 0);
        assert_eq!(weight(c, d, &im).unwrap(), 252);
        assert_eq!(weight(a, a, &im).unwrap(), 0);
    }

    #[test]
    fn pgm_p5_bytes_load_verbatim() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.pgm");
        std::fs::write(&path, b"P5\n2 2\n255\n\x00\x0a\x14\x1e").unwrap();
        let im = load_image(&path).unwrap();
        assert_eq!((im.width(), im.height()), (2, 2));
        assert_eq!(im.data, vec![0, 10, 20, 30]);
    }

    #[test]
    fn png_gray_and_rgb_conversion() {
        let dir = tempfile::tempdir().unwrap();

        let gray_path = dir.path().join("g.png");
        let gray = image::GrayImage::from_raw(2, 2, vec![255, 0, 7, 9]).unwrap();
        gray.save(&gray_path).unwrap();
        let im = load_image(&gray_path).unwrap();
        assert_eq!(im.intensity(PixelCoord::new(0, 0)), 255);
        assert_eq!(im.intensity(PixelCoord::new(1, 1)), 9);

        // (255, 0, 0) -> round(299*255/1000) = 76
        let rgb_path = dir.path().join("r.png");
        let rgb = image::RgbImage::from_fn(2, 2, |_, _| image::Rgb([255, 0, 0]));
        rgb.save(&rgb_path).unwrap();
        let im = load_image(&rgb_path).unwrap();
        assert_eq!(im.intensity(PixelCoord::new(0, 0)), 76);
    }

    #[test]
    fn sixteen_bit_input_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("deep.png");
        let img16 = image::ImageBuffer::<image::Luma<u16>, _>::from_raw(2, 2, vec![0u16; 4])
            .unwrap();
        img16.save(&path).unwrap();
        let err = load_image(&path).unwrap_err();
        assert!(format!("{err}").contains("unsupported bit depth"));
    }

    #[test]
    fn dataset_layout_and_ordering() {
        let dir = tempfile::tempdir().unwrap();
        for class in ["brick", "bark"] {
            let cdir = dir.path().join(class);
            std::fs::create_dir(&cdir).unwrap();
            for i in 0..10 {
                let bytes: Vec<u8> = (0..4).map(|j| (i * 4 + j) as u8).collect();
                let mut file = b"P5\n2 2\n255\n".to_vec();
                file.extend_from_slice(&bytes);
                std::fs::write(cdir.join(format!("s{i:02}.pgm")), file).unwrap();
            }
        }
        let ds = load_dataset(dir.path()).unwrap();
        assert_eq!(ds.classes, vec!["bark", "brick"]);
        assert_eq!(ds.samples.len(), 20);
        assert_eq!(ds.samples[0].class, 0);
        assert_eq!(ds.samples[0].id, "s00");
        assert!(ds.samples[..10].iter().all(|s| s.class == 0));
    }

    #[test]
    fn empty_root_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_dataset(dir.path()).unwrap_err();
        assert!(format!("{err}").contains("no class directories"));
    }

    #[test]
    fn brodatz_sized_layout_counts() {
        // 110 classes x 10 samples.
        let dir = tempfile::tempdir().unwrap();
        for c in 0..110 {
            let cdir = dir.path().join(format!("c{c:03}"));
            std::fs::create_dir(&cdir).unwrap();
            for i in 0..10 {
                std::fs::write(
                    cdir.join(format!("{i}.pgm")),
                    b"P5\n2 2\n255\n\x01\x02\x03\x04",
                )
                .unwrap();
            }
        }
        let ds = load_dataset(dir.path()).unwrap();
        assert_eq!(ds.classes.len(), 110);
        assert_eq!(ds.samples.len(), 1100);
    }

    proptest! {
        #[test]
        fn code_is_a_bijection(w in 2u32..20, h in 2u32..20) {
            let im = img(w, h, vec![0; (w * h) as usize]);
            let codes: HashSet<usize> = (0..h)
                .flat_map(|x| (0..w).map(move |y| (x, y)))
                .map(|(x, y)| pixel_code(PixelCoord::new(x, y), &im).unwrap())
                .collect();
            prop_assert_eq!(codes.len(), im.pixel_count());
            prop_assert!(codes.iter().all(|&c| c < im.pixel_count()));
        }

        #[test]
        fn neighbors_are_unique_and_adjacent(w in 2u32..12, h in 2u32..12, x in 0u32..12, y in 0u32..12) {
            prop_assume!(x < h && y < w);
            let im = img(w, h, vec![0; (w * h) as usize]);
            let p = PixelCoord::new(x, y);
            let ns = neighbors(p, &im).unwrap();
            let set: HashSet<_> = ns.iter().collect();
            prop_assert_eq!(set.len(), ns.len());
            for q in &ns {
                let cheb = q.x.abs_diff(p.x).max(q.y.abs_diff(p.y));
                prop_assert!(cheb <= 1);
            }
        }

        #[test]
        fn weight_is_symmetric_and_bounded(a in 0u8..=255, b in 0u8..=255) {
            let im = img(2, 2, vec![a, b, 0, 0]);
            let i = PixelCoord::new(0, 0);
            let j = PixelCoord::new(0, 1);
            prop_assert_eq!(weight(i, j, &im).unwrap(), weight(j, i, &im).unwrap());
        }
    }
}
