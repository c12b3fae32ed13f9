use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::{AffineOperator, TransportError};

/// Writes every basis matrix `A_i`, `B_i` and the output map `C` as
/// coordinate lists (`row col value`, zero based) into `dir`.
///
/// Each file starts with `%` header lines giving `n`, `n_f`, the weight index
/// and the sign pattern (`+`/`-` per edge). Returns the written paths.
pub fn write_coo(operator: &AffineOperator, dir: &Path) -> Result<Vec<PathBuf>, TransportError> {
    let io = |path: &Path, source| TransportError::Io { path: path.display().to_string(), source };
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let header = |kind: &str, weight: Option<usize>| {
        let mut h = format!(
            "% {kind}\n% n={} n_f={} outputs={}\n% sign_pattern={}\n",
            operator.n_states(),
            operator.n_weights(),
            operator.n_outputs(),
            operator.pattern()
        );
        if let Some(w) = weight {
            h.push_str(&format!("% weight={w} {:?}\n", operator.weights()[w]));
        }
        h
    };
    let mut written = Vec::new();
    let mut emit = |name: String, body: String| -> Result<(), TransportError> {
        let path = dir.join(name);
        let mut f = fs::File::create(&path).map_err(|e| io(&path, e))?;
        f.write_all(body.as_bytes()).map_err(|e| io(&path, e))?;
        written.push(path);
        Ok(())
    };
    for w in 0..operator.n_weights() {
        let mut body = header("A", Some(w));
        for (r, c, v) in operator.basis_matrix(w).triplets() {
            body.push_str(&format!("{r} {c} {v:e}\n"));
        }
        emit(format!("A_{w}.coo"), body)?;
        let mut body = header("B", Some(w));
        for (r, v) in operator.basis_input(w).iter().enumerate().filter(|(_, v)| **v != 0.0) {
            body.push_str(&format!("{r} 0 {v:e}\n"));
        }
        emit(format!("B_{w}.coo"), body)?;
    }
    let mut body = header("C", None);
    for (r, c, v) in operator.output_map().triplets() {
        body.push_str(&format!("{r} {c} {v:e}\n"));
    }
    emit("C.coo".into(), body)?;
    Ok(written)
}
