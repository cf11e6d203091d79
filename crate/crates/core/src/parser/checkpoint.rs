use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde_json::json;

use crate::nnet::{read_checkpoint, write_checkpoint, Tensor};

use super::{Model, ModelConfig, ParserError};

const ROOT_TENSOR: &str = "root";

pub fn write_model<W: Write>(
    model: &Model,
    out: &mut W,
    extra: Option<&serde_json::Value>,
) -> Result<(), ParserError> {
    let header = json!({
        "config": model.config,
        "inventory_language": model.inventory.language,
        "inventory_version": model.inventory.version,
        "extra": extra,
    });
    let root = Tensor::new(vec![model.root.len()], model.root.clone())?;
    let mut tensors: Vec<(&str, &Tensor)> = model.store.named_tensors().collect();
    tensors.push((ROOT_TENSOR, &root));
    write_checkpoint(out, &header, &tensors)?;
    Ok(())
}

/// Reads a model and the free-form `extra` header value it was saved with.
pub fn read_model<R: Read>(input: &mut R) -> Result<(Model, serde_json::Value), ParserError> {
    let (header, tensors) = read_checkpoint(input)?;
    let config: ModelConfig = serde_json::from_value(header["config"].clone())
        .map_err(|e| ParserError::Checkpoint(format!("bad model config: {e}")))?;
    let mut model = Model::new(config)?;
    let version = header["inventory_version"].as_str().unwrap_or_default();
    if version != model.inventory.version {
        return Err(ParserError::Checkpoint(format!(
            "relation inventory {version:?} does not match {:?}",
            model.inventory.version
        )));
    }
    let mut seen = vec![false; model.store.len()];
    for (name, tensor) in tensors {
        if name == ROOT_TENSOR {
            if tensor.numel() != model.root.len() {
                return Err(ParserError::Checkpoint(
                    "root vector has wrong length".into(),
                ));
            }
            model.root = tensor.into_data();
            continue;
        }
        let id = model
            .store
            .find(&name)
            .ok_or_else(|| ParserError::Checkpoint(format!("unknown tensor {name:?}")))?;
        model.store.set(id, tensor)?;
        seen[id.index()] = true;
    }
    if let Some(missing) = model.store.ids().find(|id| !seen[id.index()]) {
        return Err(ParserError::Checkpoint(format!(
            "missing tensor {:?}",
            model.store.name(missing)
        )));
    }
    Ok((model, header["extra"].clone()))
}

pub fn save_model(
    model: &Model,
    path: &Path,
    extra: Option<&serde_json::Value>,
) -> Result<(), ParserError> {
    let io = |source| ParserError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    write_model(model, &mut out, extra)?;
    out.flush().map_err(io)
}

pub fn load_model(path: &Path) -> Result<(Model, serde_json::Value), ParserError> {
    let file = File::open(path).map_err(|source| ParserError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_model(&mut BufReader::new(file))
}
