//! XYZ molecule files and recentering.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use gigp_core::RawPointCloud;

/// Element symbols with a one-hot slot each, in feature order.
pub const ELEMENTS: [&str; 5] = ["H", "C", "N", "O", "F"];

#[derive(Clone, Debug, PartialEq)]
pub struct Molecule {
    pub cloud: RawPointCloud,
    pub comment: String,
}

impl Molecule {
    /// The value after `target=` in the comment line, else its first number.
    pub fn target(&self) -> Option<f64> {
        let tokens: Vec<&str> = self.comment.split_whitespace().collect();
        if let Some(v) = tokens.iter().find_map(|t| t.strip_prefix("target=")) {
            return v.parse().ok();
        }
        tokens.iter().find_map(|t| t.parse().ok())
    }
}

/// Parses one or more concatenated XYZ frames.
pub fn parse_xyz(text: &str) -> Result<Vec<Molecule>> {
    let lines: Vec<&str> = text.lines().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        if lines[i].trim().is_empty() {
            i += 1;
            continue;
        }
        let count: usize = lines[i].trim().parse().map_err(|_| anyhow!("line {}: expected an atom count, found {:?}", i + 1, lines[i]))?;
        if count == 0 {
            bail!("line {}: a molecule needs at least one atom", i + 1);
        }
        let comment = lines.get(i + 1).ok_or_else(|| anyhow!("line {}: missing comment line", i + 2))?;
        let mut coords = Vec::with_capacity(3 * count);
        let mut feats = Vec::with_capacity(ELEMENTS.len() * count);
        for a in 0..count {
            let lineno = i + 3 + a;
            let line = lines
                .get(lineno - 1)
                .filter(|l| !l.trim().is_empty())
                .ok_or_else(|| anyhow!("line {lineno}: header declares {count} atoms, body ends after {a}"))?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() < 4 {
                bail!("line {lineno}: expected \"symbol x y z\"");
            }
            let slot =
                ELEMENTS.iter().position(|e| *e == fields[0]).ok_or_else(|| anyhow!("line {lineno}: unknown element {:?}", fields[0]))?;
            for f in &fields[1..4] {
                coords.push(f.parse::<f64>().map_err(|_| anyhow!("line {lineno}: bad coordinate {f:?}"))?);
            }
            feats.extend((0..ELEMENTS.len()).map(|k| if k == slot { 1.0 } else { 0.0 }));
        }
        let next = i + 2 + count;
        if let Some(extra) = lines.get(next) {
            let t = extra.split_whitespace().collect::<Vec<_>>();
            if t.len() >= 4 {
                bail!("line {}: more atoms than the header count {count}", next + 1);
            }
        }
        out.push(Molecule {
            cloud: RawPointCloud::new(3, coords, ELEMENTS.len(), feats).with_context(|| format!("line {}", i + 1))?,
            comment: comment.trim().to_string(),
        });
        i = next;
    }
    if out.is_empty() {
        bail!("no molecules found");
    }
    Ok(out)
}

pub fn load_xyz_frames(path: &Path) -> Result<Vec<Molecule>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_xyz(&text).with_context(|| format!("parsing {}", path.display()))
}

/// The first molecule of an XYZ file.
pub fn load_xyz(path: &Path) -> Result<RawPointCloud> {
    Ok(load_xyz_frames(path)?.swap_remove(0).cloud)
}

/// Shifts coordinates by minus their unweighted mean.
pub fn recenter(cloud: &RawPointCloud) -> RawPointCloud {
    let n = cloud.len() as f64;
    let mean: Vec<f64> = (0..cloud.dim).map(|d| cloud.coords.iter().skip(d).step_by(cloud.dim).sum::<f64>() / n).collect();
    let coords = cloud.coords.chunks(cloud.dim).flat_map(|p| p.iter().zip(&mean).map(|(x, m)| x - m).collect::<Vec<_>>()).collect();
    RawPointCloud::new(cloud.dim, coords, cloud.feat_dim, cloud.features.clone()).unwrap()
}
