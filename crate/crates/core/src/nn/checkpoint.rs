//! JSON checkpoint form of [`DenseNet`]: layer shapes, activations, dropout
//! rates and row-major weights under a format version.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{Activation, DenseNet, Layer, NnError};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct NetDoc {
    version: u32,
    input_width: usize,
    output_width: usize,
    layers: Vec<LayerDoc>,
}

#[derive(Serialize, Deserialize)]
struct LayerDoc {
    inputs: usize,
    outputs: usize,
    activation: Activation,
    dropout: f64,
    weight: Vec<f64>,
    bias: Vec<f64>,
}

impl DenseNet {
    fn to_doc(&self) -> NetDoc {
        NetDoc {
            version: CHECKPOINT_VERSION,
            input_width: self.input_width(),
            output_width: self.output_width(),
            layers: self
                .layers()
                .iter()
                .map(|l| LayerDoc {
                    inputs: l.inputs(),
                    outputs: l.outputs(),
                    activation: l.activation,
                    dropout: l.dropout,
                    weight: l.weight.iter().copied().collect(),
                    bias: l.bias.to_vec(),
                })
                .collect(),
        }
    }

    fn from_doc(doc: NetDoc) -> Result<Self, NnError> {
        if doc.version != CHECKPOINT_VERSION {
            return Err(NnError::Checkpoint(format!("unsupported checkpoint version {}", doc.version)));
        }
        let layers = doc
            .layers
            .into_iter()
            .map(|l| {
                let weight = Array2::from_shape_vec((l.outputs, l.inputs), l.weight)
                    .map_err(|e| NnError::Checkpoint(e.to_string()))?;
                Ok(Layer { weight, bias: Array1::from(l.bias), activation: l.activation, dropout: l.dropout })
            })
            .collect::<Result<Vec<_>, NnError>>()?;
        let net = DenseNet::new(layers)?;
        if net.input_width() != doc.input_width || net.output_width() != doc.output_width {
            return Err(NnError::Checkpoint("declared widths disagree with layers".into()));
        }
        Ok(net)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_doc()).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Self, NnError> {
        let doc: NetDoc = serde_json::from_str(text).map_err(|e| NnError::Checkpoint(e.to_string()))?;
        Self::from_doc(doc)
    }
}

impl Serialize for DenseNet {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_doc().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DenseNet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        DenseNet::from_doc(NetDoc::deserialize(deserializer)?).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn json_roundtrip_is_lossless() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let net = DenseNet::mlp(5, &[7, 4], 0.2, 3, Activation::Softmax, &mut rng).unwrap();
        let text = net.to_json();
        assert!(text.contains("\"version\":1"));
        assert_eq!(DenseNet::from_json(&text).unwrap(), net);
    }

    #[test]
    fn rejects_unknown_version_and_bad_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let net = DenseNet::mlp(2, &[], 0.0, 2, Activation::Softmax, &mut rng).unwrap();
        let text = net.to_json().replace("\"version\":1", "\"version\":9");
        assert!(DenseNet::from_json(&text).is_err());
        let text = net.to_json().replace("\"inputs\":2", "\"inputs\":3");
        assert!(DenseNet::from_json(&text).is_err());
    }
}
