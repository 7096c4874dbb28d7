//! Raster file formats: ESRI ASCII grids (`.asc`) and single-band GeoTIFF
//! (`.tif`, `.tiff`) in geographic coordinates.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use geobias_core::{GeoTransform, RasterLayer};
use tiff::decoder::{Decoder, DecodingResult, Limits};
use tiff::encoder::{colortype, TiffEncoder};
use tiff::tags::Tag;
use tiff::ColorType;

use crate::error::{Error, IoContext, Result};

const GEO_KEY_DIRECTORY: u16 = 34735;
const RASTER_TYPE_KEY: u16 = 1025;
const PIXEL_IS_POINT: u16 = 2;

/// Loads a raster, choosing the format from the file extension.
pub fn load_raster(path: &Path) -> Result<RasterLayer> {
    let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some("asc") => parse_ascii_grid(&std::fs::read_to_string(path).at(path)?)
            .map_err(|e| Error::data(format!("{}: {e}", path.display()))),
        Some("tif" | "tiff") => read_geotiff(path),
        _ => Err(Error::config(format!("{}: unsupported raster format (use .asc or .tif)", path.display()))),
    }
}

/// Parses an ESRI ASCII grid. Accepts corner or center origins and the
/// `dx`/`dy` variant of the cell size.
pub fn parse_ascii_grid(text: &str) -> Result<RasterLayer, String> {
    let mut tokens = text.split_ascii_whitespace().peekable();
    let mut ncols = None;
    let mut nrows = None;
    let (mut x, mut y, mut centered) = (None, None, false);
    let (mut dx, mut dy) = (None, None);
    let mut nodata = None;
    while let Some(key) = tokens.peek().map(|t| t.to_ascii_lowercase()) {
        if key.parse::<f64>().is_ok() {
            break;
        }
        tokens.next();
        let value = tokens.next().ok_or_else(|| format!("missing value for {key}"))?;
        let num = || value.parse::<f64>().map_err(|_| format!("bad value for {key}: {value}"));
        match key.as_str() {
            "ncols" => ncols = Some(value.parse::<usize>().map_err(|_| format!("bad ncols: {value}"))?),
            "nrows" => nrows = Some(value.parse::<usize>().map_err(|_| format!("bad nrows: {value}"))?),
            "xllcorner" => x = Some(num()?),
            "yllcorner" => y = Some(num()?),
            "xllcenter" => (x, centered) = (Some(num()?), true),
            "yllcenter" => (y, centered) = (Some(num()?), true),
            "cellsize" => (dx, dy) = (Some(num()?), Some(num()?)),
            "dx" => dx = Some(num()?),
            "dy" => dy = Some(num()?),
            "nodata_value" => nodata = Some(num()?),
            other => return Err(format!("unknown header key {other}")),
        }
    }
    let (Some(ncols), Some(nrows), Some(x), Some(y), Some(dx), Some(dy)) = (ncols, nrows, x, y, dx, dy) else {
        return Err("incomplete header".into());
    };
    let data: Vec<f64> = tokens
        .map(|t| t.parse::<f64>().map_err(|_| format!("bad cell value {t}")))
        .collect::<Result<_, _>>()?;
    let (west, south) = if centered { (x - dx / 2.0, y - dy / 2.0) } else { (x, y) };
    let transform = GeoTransform::north_up(west, south + nrows as f64 * dy, dx, dy);
    RasterLayer::new(ncols, nrows, data, transform, nodata).map_err(|e| e.to_string())
}

/// ASCII grid text for a north-up layer, cells in shortest round-trip form.
pub fn format_ascii_grid(layer: &RasterLayer) -> Result<String, String> {
    let c = layer.transform().0;
    if c[2] != 0.0 || c[4] != 0.0 || c[1] <= 0.0 || c[5] >= 0.0 {
        return Err("ASCII grids must be north-up".into());
    }
    let (w, h) = (layer.width(), layer.height());
    let mut out = format!("ncols {w}\nnrows {h}\nxllcorner {}\nyllcorner {}\n", c[0], c[3] + h as f64 * c[5]);
    if c[1] == -c[5] {
        out += &format!("cellsize {}\n", c[1]);
    } else {
        out += &format!("dx {}\ndy {}\n", c[1], -c[5]);
    }
    if let Some(nd) = layer.nodata() {
        out += &format!("NODATA_value {nd}\n");
    }
    for row in layer.data().chunks(w) {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out += &line.join(" ");
        out.push('\n');
    }
    Ok(out)
}

fn tiff_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::data(format!("{}: {e}", path.display()))
}

fn transform_from_tags<R: std::io::Read + std::io::Seek>(dec: &mut Decoder<R>, path: &Path) -> Result<GeoTransform> {
    let f64s = |dec: &mut Decoder<R>, tag: Tag| -> Result<Option<Vec<f64>>> {
        match dec.find_tag(tag).map_err(|e| tiff_err(path, e))? {
            Some(v) => Ok(Some(v.into_f64_vec().map_err(|e| tiff_err(path, e))?)),
            None => Ok(None),
        }
    };
    let mut c = if let Some(m) = f64s(dec, Tag::ModelTransformationTag)? {
        if m.len() < 8 {
            return Err(tiff_err(path, "short ModelTransformation tag"));
        }
        [m[3], m[0], m[1], m[7], m[4], m[5]]
    } else {
        let scale = f64s(dec, Tag::ModelPixelScaleTag)?.ok_or_else(|| tiff_err(path, "no georeferencing tags"))?;
        let tie = f64s(dec, Tag::ModelTiepointTag)?.ok_or_else(|| tiff_err(path, "no ModelTiepoint tag"))?;
        if scale.len() < 2 || tie.len() < 6 {
            return Err(tiff_err(path, "short georeferencing tags"));
        }
        let (i, j, x, y) = (tie[0], tie[1], tie[3], tie[4]);
        [x - i * scale[0], scale[0], 0.0, y + j * scale[1], 0.0, -scale[1]]
    };
    let keys = match dec.find_tag(Tag::Unknown(GEO_KEY_DIRECTORY)).map_err(|e| tiff_err(path, e))? {
        Some(v) => v.into_u16_vec().unwrap_or_default(),
        None => Vec::new(),
    };
    let point = keys.get(4..).unwrap_or(&[]).chunks(4).any(|k| k.len() == 4 && k[0] == RASTER_TYPE_KEY && k[3] == PIXEL_IS_POINT);
    if point {
        // Tie points name pixel centers; shift the origin to the corner.
        c[0] -= 0.5 * (c[1] + c[2]);
        c[3] -= 0.5 * (c[4] + c[5]);
    }
    Ok(GeoTransform(c))
}

pub fn read_geotiff(path: &Path) -> Result<RasterLayer> {
    let file = File::open(path).at(path)?;
    let mut dec = Decoder::new(BufReader::new(file)).map_err(|e| tiff_err(path, e))?.with_limits(Limits::unlimited());
    let (w, h) = dec.dimensions().map_err(|e| tiff_err(path, e))?;
    match dec.colortype().map_err(|e| tiff_err(path, e))? {
        ColorType::Gray(_) => {}
        other => return Err(tiff_err(path, format!("expected a single-band image, got {other:?}"))),
    }
    let transform = transform_from_tags(&mut dec, path)?;
    let nodata_text = match dec.find_tag(Tag::GdalNodata).map_err(|e| tiff_err(path, e))? {
        Some(v) => Some(v.into_string().map_err(|e| tiff_err(path, e))?),
        None => None,
    };
    let nodata = nodata_text
        .map(|s| s.trim_matches(|c: char| c.is_whitespace() || c == '\0').to_string())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| tiff_err(path, format!("bad GDAL_NODATA {s:?}"))))
        .transpose()?;
    let image = dec.read_image().map_err(|e| tiff_err(path, e))?;
    // Values are compared after widening, so the sentinel goes through the
    // same conversion as the cells.
    let (data, nodata): (Vec<f64>, Option<f64>) = match image {
        DecodingResult::U8(v) => (v.into_iter().map(f64::from).collect(), nodata),
        DecodingResult::U16(v) => (v.into_iter().map(f64::from).collect(), nodata),
        DecodingResult::U32(v) => (v.into_iter().map(f64::from).collect(), nodata),
        DecodingResult::U64(v) => (v.into_iter().map(|x| x as f64).collect(), nodata),
        DecodingResult::I8(v) => (v.into_iter().map(f64::from).collect(), nodata),
        DecodingResult::I16(v) => (v.into_iter().map(f64::from).collect(), nodata),
        DecodingResult::I32(v) => (v.into_iter().map(f64::from).collect(), nodata),
        DecodingResult::I64(v) => (v.into_iter().map(|x| x as f64).collect(), nodata),
        DecodingResult::F16(v) => (v.into_iter().map(f64::from).collect(), nodata),
        DecodingResult::F32(v) => (v.into_iter().map(f64::from).collect(), nodata.map(|n| n as f32 as f64)),
        DecodingResult::F64(v) => (v, nodata),
    };
    RasterLayer::new(w as usize, h as usize, data, transform, nodata).map_err(|e| tiff_err(path, e))
}

/// Writes a 64-bit float GeoTIFF with WGS84 geographic keys.
pub fn write_geotiff(path: &Path, layer: &RasterLayer) -> Result<()> {
    let file = File::create(path).at(path)?;
    let mut out = BufWriter::new(file);
    let mut enc = TiffEncoder::new(&mut out).map_err(|e| tiff_err(path, e))?;
    let mut image = enc
        .new_image::<colortype::Gray64Float>(layer.width() as u32, layer.height() as u32)
        .map_err(|e| tiff_err(path, e))?;
    let c = layer.transform().0;
    let dir = image.encoder();
    if c[2] == 0.0 && c[4] == 0.0 && c[5] < 0.0 {
        dir.write_tag(Tag::ModelPixelScaleTag, &[c[1], -c[5], 0.0][..]).map_err(|e| tiff_err(path, e))?;
        dir.write_tag(Tag::ModelTiepointTag, &[0.0, 0.0, 0.0, c[0], c[3], 0.0][..]).map_err(|e| tiff_err(path, e))?;
    } else {
        let m = [c[1], c[2], 0.0, c[0], c[4], c[5], 0.0, c[3], 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0];
        dir.write_tag(Tag::ModelTransformationTag, &m[..]).map_err(|e| tiff_err(path, e))?;
    }
    let keys: [u16; 16] = [1, 1, 0, 3, 1024, 0, 1, 2, RASTER_TYPE_KEY, 0, 1, 1, 2048, 0, 1, 4326];
    dir.write_tag(Tag::Unknown(GEO_KEY_DIRECTORY), &keys[..]).map_err(|e| tiff_err(path, e))?;
    if let Some(nd) = layer.nodata() {
        dir.write_tag(Tag::GdalNodata, &nd.to_string()[..]).map_err(|e| tiff_err(path, e))?;
    }
    image.write_data(layer.data()).map_err(|e| tiff_err(path, e))?;
    out.flush().at(path)
}
