//! Binary weight container: `"GSCP"`, a `u16` format version, a `u32` JSON
//! header length, the JSON header, then every parameter as little-endian
//! `f32` in declared layer order (weight before bias).

use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::nn::{Layer, LayerSpec, Network};

pub const MAGIC: &[u8; 4] = b"GSCP";
pub const FORMAT_VERSION: u16 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkHeader {
    pub name: String,
    pub layers: Vec<LayerSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightHeader {
    /// What the file holds, e.g. `"generator"`.
    pub kind: String,
    /// Kind-specific metadata.
    pub meta: serde_json::Value,
    pub networks: Vec<NetworkHeader>,
}

pub fn encode(kind: &str, meta: serde_json::Value, networks: &[(&str, &Network)]) -> Result<Vec<u8>> {
    let header = WeightHeader {
        kind: kind.to_string(),
        meta,
        networks: networks.iter().map(|(n, net)| NetworkHeader { name: n.to_string(), layers: net.specs() }).collect(),
    };
    let json = serde_json::to_vec(&header)?;
    let len = u32::try_from(json.len()).map_err(|_| Error::Format("header too large".into()))?;
    let mut out = Vec::with_capacity(10 + json.len() + networks.iter().map(|(_, n)| 4 * n.param_count()).sum::<usize>());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(&json);
    for (_, net) in networks {
        for p in net.params() {
            for v in p.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    Ok(out)
}

fn take<'a>(bytes: &'a [u8], at: &mut usize, n: usize, what: &str) -> Result<&'a [u8]> {
    let end = at.checked_add(n).filter(|&e| e <= bytes.len()).ok_or_else(|| {
        Error::Format(format!("file truncated while reading {what} ({} bytes, need {})", bytes.len(), *at + n))
    })?;
    let s = &bytes[*at..end];
    *at = end;
    Ok(s)
}

/// Parses a weight file, optionally requiring a particular `kind`.
pub fn decode(bytes: &[u8], expect_kind: Option<&str>) -> Result<(WeightHeader, Vec<Network>)> {
    let mut at = 0;
    if take(bytes, &mut at, 4, "magic")? != MAGIC {
        return Err(Error::Format("not a weight file (bad magic)".into()));
    }
    let version = u16::from_le_bytes(take(bytes, &mut at, 2, "version")?.try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("format version {version}, expected {FORMAT_VERSION}")));
    }
    let len = u32::from_le_bytes(take(bytes, &mut at, 4, "header length")?.try_into().unwrap()) as usize;
    let header: WeightHeader = serde_json::from_slice(take(bytes, &mut at, len, "header")?)
        .map_err(|e| Error::Format(format!("bad header: {e}")))?;
    if let Some(kind) = expect_kind {
        if header.kind != kind {
            return Err(Error::Format(format!("file holds a {:?}, expected a {kind:?}", header.kind)));
        }
    }
    let mut read = |shape: Vec<usize>| -> Result<Tensor> {
        let n: usize = shape.iter().product();
        let raw = take(bytes, &mut at, 4 * n, "parameters")?;
        let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        Tensor::new(shape, data)
    };
    let mut nets = Vec::new();
    for nh in &header.networks {
        let mut layers = Vec::new();
        for spec in &nh.layers {
            let w = read(spec.weight_shape())?;
            let b = read(vec![spec.bias_len()])?;
            layers.push(Layer::from_parts(spec.clone(), w, b)?);
        }
        nets.push(Network::new(layers)?);
    }
    if at != bytes.len() {
        return Err(Error::Format(format!("{} trailing bytes after parameters", bytes.len() - at)));
    }
    Ok((header, nets))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Activation;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_layer() -> Network {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        Network::init(
            vec![
                LayerSpec::linear(&[4], &[2, 2, 2], Activation::LEAKY),
                LayerSpec::conv_transpose(&[2, 2, 2], 3, 4, 2, 1, Activation::Tanh).unwrap(),
            ],
            &mut rng,
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let net = two_layer();
        let bytes = encode("test", serde_json::json!({"a": 1}), &[("net", &net)]).unwrap();
        let (header, nets) = decode(&bytes, Some("test")).unwrap();
        assert_eq!(nets[0], net);
        assert_eq!(header.networks[0].name, "net");
        let again = encode("test", header.meta, &[("net", &nets[0])]).unwrap();
        assert_eq!(bytes, again);
    }

    #[test]
    fn rejects_damaged_files() {
        let net = two_layer();
        let bytes = encode("test", serde_json::Value::Null, &[("net", &net)]).unwrap();
        for cut in [0, 3, 8, 20, bytes.len() - 1] {
            assert!(matches!(decode(&bytes[..cut], None), Err(Error::Format(_))), "cut {cut}");
        }
        let mut wrong = bytes.clone();
        wrong[4] = 9;
        assert!(decode(&wrong, None).unwrap_err().to_string().contains("version"));
        assert!(decode(&bytes, Some("generator")).is_err());
        let mut extra = bytes;
        extra.push(0);
        assert!(decode(&extra, None).is_err());
    }
}
