//! Minimal TrueType reader for quadratic glyph outlines.
//!
//! Only the tables needed to recover raw control points are read: `head`,
//! `maxp`, `loca`, `glyf` and `cmap` (formats 4 and 12). A matching writer,
//! [`FontBuilder`], produces small fonts for tests and fixtures.

use std::collections::BTreeMap;

use crate::error::{ContourError, Result};

/// One stored outline point in font units.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RawPoint {
    pub x: i32,
    pub y: i32,
    pub on_curve: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawOutline {
    pub contours: Vec<Vec<RawPoint>>,
}

impl RawOutline {
    pub fn bounds(&self) -> Option<(i32, i32, i32, i32)> {
        let mut it = self.contours.iter().flatten();
        let first = it.next()?;
        Some(it.fold((first.x, first.y, first.x, first.y), |(x0, y0, x1, y1), p| {
            (x0.min(p.x), y0.min(p.y), x1.max(p.x), y1.max(p.y))
        }))
    }
}

const ON_CURVE: u8 = 0x01;
const X_SHORT: u8 = 0x02;
const Y_SHORT: u8 = 0x04;
const REPEAT: u8 = 0x08;
const X_SAME_OR_POSITIVE: u8 = 0x10;
const Y_SAME_OR_POSITIVE: u8 = 0x20;

const ARG_1_AND_2_ARE_WORDS: u16 = 0x0001;
const ARGS_ARE_XY_VALUES: u16 = 0x0002;
const WE_HAVE_A_SCALE: u16 = 0x0008;
const MORE_COMPONENTS: u16 = 0x0020;
const WE_HAVE_AN_X_AND_Y_SCALE: u16 = 0x0040;
const WE_HAVE_A_TWO_BY_TWO: u16 = 0x0080;

const MAX_COMPONENT_DEPTH: usize = 8;

struct Reader<'a> {
    data: &'a [u8],
}

impl<'a> Reader<'a> {
    fn bytes(&self, offset: usize, len: usize) -> Result<&'a [u8]> {
        offset
            .checked_add(len)
            .and_then(|end| self.data.get(offset..end))
            .ok_or_else(|| malformed(format!("read of {len} bytes at {offset} out of bounds")))
    }

    fn u8(&self, offset: usize) -> Result<u8> {
        Ok(self.bytes(offset, 1)?[0])
    }

    fn u16(&self, offset: usize) -> Result<u16> {
        let b = self.bytes(offset, 2)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    fn i16(&self, offset: usize) -> Result<i16> {
        Ok(self.u16(offset)? as i16)
    }

    fn u32(&self, offset: usize) -> Result<u32> {
        let b = self.bytes(offset, 4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }
}

fn malformed(msg: impl Into<String>) -> ContourError {
    ContourError::MalformedFont(msg.into())
}

/// A parsed font container borrowing its bytes.
pub struct Font<'a> {
    data: Reader<'a>,
    units_per_em: u16,
    loca: Vec<u32>,
    glyf: (usize, usize),
    cmap: BTreeMap<u32, u16>,
}

impl<'a> Font<'a> {
    pub fn parse(data: &'a [u8]) -> Result<Self> {
        let r = Reader { data };
        let num_tables = r.u16(4)? as usize;
        let mut tables = BTreeMap::new();
        for i in 0..num_tables {
            let rec = 12 + 16 * i;
            let tag = r.bytes(rec, 4)?;
            let offset = r.u32(rec + 8)? as usize;
            let length = r.u32(rec + 12)? as usize;
            r.bytes(offset, length)?;
            tables.insert(tag.to_vec(), (offset, length));
        }
        let table = |tag: &[u8; 4]| {
            tables.get(tag.as_slice()).copied().ok_or_else(|| {
                malformed(format!("missing `{}` table", String::from_utf8_lossy(tag)))
            })
        };

        let (head, _) = table(b"head")?;
        let units_per_em = r.u16(head + 18)?;
        if units_per_em == 0 {
            return Err(malformed("unitsPerEm is zero"));
        }
        let long_loca = r.i16(head + 50)? != 0;

        let (maxp, _) = table(b"maxp")?;
        let num_glyphs = r.u16(maxp + 4)? as usize;

        let (loca_off, _) = table(b"loca")?;
        let loca = (0..=num_glyphs)
            .map(|i| {
                if long_loca {
                    r.u32(loca_off + 4 * i)
                } else {
                    r.u16(loca_off + 2 * i).map(|v| v as u32 * 2)
                }
            })
            .collect::<Result<Vec<_>>>()?;

        let glyf = table(b"glyf")?;
        let (cmap_off, _) = table(b"cmap")?;
        let cmap = parse_cmap(&r, cmap_off)?;
        Ok(Self {
            data: r,
            units_per_em,
            loca,
            glyf,
            cmap,
        })
    }

    pub fn units_per_em(&self) -> u16 {
        self.units_per_em
    }

    pub fn num_glyphs(&self) -> usize {
        self.loca.len() - 1
    }

    pub fn glyph_index(&self, c: char) -> Option<u16> {
        self.cmap.get(&(c as u32)).copied().filter(|&g| g != 0)
    }

    /// Outline of the glyph mapped to `c`, with composite glyphs flattened.
    pub fn outline(&self, c: char) -> Result<RawOutline> {
        let gid = self.glyph_index(c).ok_or(ContourError::GlyphAbsent(c))?;
        self.outline_by_id(gid, 0)
    }

    fn outline_by_id(&self, gid: u16, depth: usize) -> Result<RawOutline> {
        if depth > MAX_COMPONENT_DEPTH {
            return Err(ContourError::UnsupportedGlyph("component nesting too deep".into()));
        }
        let gid = gid as usize;
        if gid >= self.num_glyphs() {
            return Err(malformed(format!("glyph id {gid} out of range")));
        }
        let (start, end) = (self.loca[gid] as usize, self.loca[gid + 1] as usize);
        if end <= start {
            return Ok(RawOutline::default());
        }
        if end > self.glyf.1 {
            return Err(malformed(format!("glyph {gid} extends past glyf")));
        }
        let base = self.glyf.0 + start;
        let r = &self.data;
        let num_contours = r.i16(base)?;
        if num_contours >= 0 {
            parse_simple(r, base, num_contours as usize)
        } else {
            self.parse_composite(base, depth)
        }
    }

    fn parse_composite(&self, base: usize, depth: usize) -> Result<RawOutline> {
        let r = &self.data;
        let mut off = base + 10;
        let mut out = RawOutline::default();
        loop {
            let flags = r.u16(off)?;
            let component = r.u16(off + 2)?;
            off += 4;
            let (dx, dy) = if flags & ARG_1_AND_2_ARE_WORDS != 0 {
                let v = (r.i16(off)? as i32, r.i16(off + 2)? as i32);
                off += 4;
                v
            } else {
                let v = (r.u8(off)? as i8 as i32, r.u8(off + 1)? as i8 as i32);
                off += 2;
                v
            };
            if flags & ARGS_ARE_XY_VALUES == 0 {
                return Err(ContourError::UnsupportedGlyph(
                    "point-matched component placement".into(),
                ));
            }
            if flags & (WE_HAVE_A_SCALE | WE_HAVE_AN_X_AND_Y_SCALE | WE_HAVE_A_TWO_BY_TWO) != 0 {
                return Err(ContourError::UnsupportedGlyph(
                    "non-translational component transform".into(),
                ));
            }
            let child = self.outline_by_id(component, depth + 1)?;
            out.contours.extend(child.contours.into_iter().map(|c| {
                c.into_iter()
                    .map(|p| RawPoint {
                        x: p.x + dx,
                        y: p.y + dy,
                        ..p
                    })
                    .collect()
            }));
            if flags & MORE_COMPONENTS == 0 {
                break;
            }
        }
        Ok(out)
    }
}

fn parse_simple(r: &Reader<'_>, base: usize, num_contours: usize) -> Result<RawOutline> {
    let mut off = base + 10;
    let mut end_pts = Vec::with_capacity(num_contours);
    for i in 0..num_contours {
        end_pts.push(r.u16(off + 2 * i)? as usize);
    }
    off += 2 * num_contours;
    if end_pts.windows(2).any(|w| w[1] <= w[0]) {
        return Err(malformed("endPtsOfContours not increasing"));
    }
    let num_points = end_pts.last().map_or(0, |&e| e + 1);
    let instruction_len = r.u16(off)? as usize;
    off += 2 + instruction_len;

    let mut flags = Vec::with_capacity(num_points);
    while flags.len() < num_points {
        let f = r.u8(off)?;
        off += 1;
        flags.push(f);
        if f & REPEAT != 0 {
            let n = r.u8(off)?;
            off += 1;
            flags.extend(std::iter::repeat_n(f, n as usize));
        }
    }
    flags.truncate(num_points);

    let mut read_axis = |short: u8, same_or_pos: u8| -> Result<Vec<i32>> {
        let mut v = 0i32;
        let mut out = Vec::with_capacity(num_points);
        for &f in &flags {
            if f & short != 0 {
                let d = r.u8(off)? as i32;
                off += 1;
                v += if f & same_or_pos != 0 { d } else { -d };
            } else if f & same_or_pos == 0 {
                v += r.i16(off)? as i32;
                off += 2;
            }
            out.push(v);
        }
        Ok(out)
    };
    let xs = read_axis(X_SHORT, X_SAME_OR_POSITIVE)?;
    let ys = read_axis(Y_SHORT, Y_SAME_OR_POSITIVE)?;

    let mut contours = Vec::with_capacity(num_contours);
    let mut start = 0;
    for &end in &end_pts {
        contours.push(
            (start..=end)
                .map(|i| RawPoint {
                    x: xs[i],
                    y: ys[i],
                    on_curve: flags[i] & ON_CURVE != 0,
                })
                .collect(),
        );
        start = end + 1;
    }
    Ok(RawOutline { contours })
}

fn parse_cmap(r: &Reader<'_>, base: usize) -> Result<BTreeMap<u32, u16>> {
    let num = r.u16(base + 2)? as usize;
    let mut best: Option<(u8, usize)> = None;
    for i in 0..num {
        let rec = base + 4 + 8 * i;
        let platform = r.u16(rec)?;
        let encoding = r.u16(rec + 2)?;
        let offset = base + r.u32(rec + 4)? as usize;
        let format = r.u16(offset)?;
        let rank = match (platform, encoding, format) {
            (3, 10, 12) | (0, 4, 12) | (0, 6, 12) => 3,
            (3, 1, 4) | (0, _, 4) => 2,
            (_, _, 12) => 1,
            _ => continue,
        };
        if best.is_none_or(|(b, _)| rank > b) {
            best = Some((rank, offset));
        }
    }
    let (_, off) = best.ok_or_else(|| malformed("no supported cmap subtable"))?;
    let mut map = BTreeMap::new();
    match r.u16(off)? {
        4 => {
            let seg_x2 = r.u16(off + 6)? as usize;
            let ends = off + 14;
            let starts = ends + seg_x2 + 2;
            let deltas = starts + seg_x2;
            let ranges = deltas + seg_x2;
            for s in 0..seg_x2 / 2 {
                let end = r.u16(ends + 2 * s)? as u32;
                let start = r.u16(starts + 2 * s)? as u32;
                let delta = r.u16(deltas + 2 * s)?;
                let range_off = r.u16(ranges + 2 * s)? as usize;
                if start > end || start == 0xFFFF {
                    continue;
                }
                for c in start..=end {
                    let gid = if range_off == 0 {
                        (c as u16).wrapping_add(delta)
                    } else {
                        let addr = ranges + 2 * s + range_off + 2 * (c - start) as usize;
                        match r.u16(addr)? {
                            0 => 0,
                            g => g.wrapping_add(delta),
                        }
                    };
                    if gid != 0 {
                        map.insert(c, gid);
                    }
                }
            }
        }
        12 => {
            let groups = r.u32(off + 12)? as usize;
            for g in 0..groups {
                let rec = off + 16 + 12 * g;
                let (start, end, gid) = (r.u32(rec)?, r.u32(rec + 4)?, r.u32(rec + 8)?);
                if end < start || end - start > 0x10_FFFF {
                    return Err(malformed("bad cmap12 group"));
                }
                for (k, c) in (start..=end).enumerate() {
                    map.insert(c, (gid + k as u32) as u16);
                }
            }
        }
        _ => unreachable!(),
    }
    Ok(map)
}

/// A glyph to be written by [`FontBuilder`].
#[derive(Debug, Clone)]
pub enum GlyphSource {
    Simple(Vec<Vec<RawPoint>>),
    /// Component glyph ids with offsets, plus an optional uniform scale
    /// (stored as F2Dot14) to exercise unsupported transforms.
    Composite(Vec<(u16, i16, i16, Option<f32>)>),
}

/// Writes minimal TrueType containers: `head`, `maxp`, `loca` (long),
/// `glyf` and a format-4 `cmap`.
#[derive(Debug, Clone)]
pub struct FontBuilder {
    units_per_em: u16,
    glyphs: Vec<GlyphSource>,
    cmap: BTreeMap<char, u16>,
}

impl FontBuilder {
    pub fn new(units_per_em: u16) -> Self {
        Self {
            units_per_em,
            glyphs: vec![GlyphSource::Simple(vec![])],
            cmap: BTreeMap::new(),
        }
    }

    /// Adds a glyph and returns its id; glyph 0 is `.notdef`.
    pub fn add_glyph(&mut self, glyph: GlyphSource) -> u16 {
        self.glyphs.push(glyph);
        (self.glyphs.len() - 1) as u16
    }

    pub fn map(&mut self, c: char, gid: u16) -> &mut Self {
        self.cmap.insert(c, gid);
        self
    }

    pub fn add_char(&mut self, c: char, contours: Vec<Vec<RawPoint>>) -> u16 {
        let gid = self.add_glyph(GlyphSource::Simple(contours));
        self.map(c, gid);
        gid
    }

    pub fn build(&self) -> Vec<u8> {
        let mut glyf = Vec::new();
        let mut loca = Vec::new();
        for g in &self.glyphs {
            loca.push(glyf.len() as u32);
            encode_glyph(g, &mut glyf);
            while glyf.len() % 4 != 0 {
                glyf.push(0);
            }
        }
        loca.push(glyf.len() as u32);

        let mut head = vec![0u8; 54];
        head[0..4].copy_from_slice(&0x0001_0000u32.to_be_bytes());
        head[12..16].copy_from_slice(&0x5F0F_3CF5u32.to_be_bytes());
        head[18..20].copy_from_slice(&self.units_per_em.to_be_bytes());
        head[50..52].copy_from_slice(&1i16.to_be_bytes());

        let mut maxp = vec![0u8; 6];
        maxp[0..4].copy_from_slice(&0x0000_5000u32.to_be_bytes());
        maxp[4..6].copy_from_slice(&(self.glyphs.len() as u16).to_be_bytes());

        let loca_bytes: Vec<u8> = loca.iter().flat_map(|v| v.to_be_bytes()).collect();
        let tables: Vec<(&[u8; 4], Vec<u8>)> = vec![
            (b"cmap", self.encode_cmap()),
            (b"glyf", glyf),
            (b"head", head),
            (b"loca", loca_bytes),
            (b"maxp", maxp),
        ];

        let mut out = Vec::new();
        out.extend_from_slice(&0x0001_0000u32.to_be_bytes());
        out.extend_from_slice(&(tables.len() as u16).to_be_bytes());
        out.extend_from_slice(&[0u8; 6]);
        let mut offset = 12 + 16 * tables.len();
        let mut body = Vec::new();
        for (tag, data) in &tables {
            out.extend_from_slice(*tag);
            out.extend_from_slice(&0u32.to_be_bytes());
            out.extend_from_slice(&(offset as u32).to_be_bytes());
            out.extend_from_slice(&(data.len() as u32).to_be_bytes());
            body.extend_from_slice(data);
            while body.len() % 4 != 0 {
                body.push(0);
            }
            offset = 12 + 16 * tables.len() + body.len();
        }
        out.extend(body);
        out
    }

    fn encode_cmap(&self) -> Vec<u8> {
        // One segment per mapped character plus the 0xFFFF terminator.
        let mut segs: Vec<(u16, u16)> = self
            .cmap
            .iter()
            .map(|(&c, &g)| (c as u32 as u16, g))
            .collect();
        segs.push((0xFFFF, 0));
        let seg_x2 = (segs.len() * 2) as u16;
        let mut sub = Vec::new();
        let push16 = |v: u16, buf: &mut Vec<u8>| buf.extend_from_slice(&v.to_be_bytes());
        push16(4, &mut sub);
        push16(0, &mut sub);
        push16(0, &mut sub);
        push16(seg_x2, &mut sub);
        push16(0, &mut sub);
        push16(0, &mut sub);
        push16(0, &mut sub);
        for &(c, _) in &segs {
            push16(c, &mut sub);
        }
        push16(0, &mut sub);
        for &(c, _) in &segs {
            push16(c, &mut sub);
        }
        for &(c, g) in &segs {
            push16(if c == 0xFFFF { 1 } else { g.wrapping_sub(c) }, &mut sub);
        }
        for _ in &segs {
            push16(0, &mut sub);
        }
        let len = sub.len() as u16;
        sub[2..4].copy_from_slice(&len.to_be_bytes());

        let mut out = Vec::new();
        push16(0, &mut out);
        push16(1, &mut out);
        push16(3, &mut out);
        push16(1, &mut out);
        out.extend_from_slice(&12u32.to_be_bytes());
        out.extend(sub);
        out
    }
}

fn encode_glyph(glyph: &GlyphSource, out: &mut Vec<u8>) {
    let push16 = |v: u16, out: &mut Vec<u8>| out.extend_from_slice(&v.to_be_bytes());
    match glyph {
        GlyphSource::Simple(contours) if contours.iter().all(|c| c.is_empty()) => {}
        GlyphSource::Simple(contours) => {
            let outline = RawOutline {
                contours: contours.clone(),
            };
            let (x0, y0, x1, y1) = outline.bounds().unwrap_or_default();
            push16(contours.len() as u16, out);
            for v in [x0, y0, x1, y1] {
                push16(v as i16 as u16, out);
            }
            let mut end = 0usize;
            for c in contours {
                end += c.len();
                push16((end - 1) as u16, out);
            }
            push16(0, out);
            let pts: Vec<_> = contours.iter().flatten().collect();
            // Long coordinates throughout; flags carry only the on-curve bit.
            for p in &pts {
                out.push(if p.on_curve { ON_CURVE } else { 0 });
            }
            let (mut px, mut py) = (0, 0);
            for p in &pts {
                push16((p.x - px) as i16 as u16, out);
                px = p.x;
            }
            for p in &pts {
                push16((p.y - py) as i16 as u16, out);
                py = p.y;
            }
        }
        GlyphSource::Composite(parts) => {
            push16(0xFFFF, out);
            out.extend_from_slice(&[0u8; 8]);
            for (i, &(gid, dx, dy, scale)) in parts.iter().enumerate() {
                let mut flags = ARG_1_AND_2_ARE_WORDS | ARGS_ARE_XY_VALUES;
                if i + 1 < parts.len() {
                    flags |= MORE_COMPONENTS;
                }
                if scale.is_some() {
                    flags |= WE_HAVE_A_SCALE;
                }
                push16(flags, out);
                push16(gid, out);
                push16(dx as u16, out);
                push16(dy as u16, out);
                if let Some(s) = scale {
                    push16((s * 16384.0) as i16 as u16, out);
                }
            }
        }
    }
}
