//! Plain-text mesh format and CSV exports.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{anyhow, bail, Context};
use pufem_core::grid::{ElementClass, GridClassification};
use pufem_core::mesh::{ParticleField, SimplicialMesh};
use pufem_core::mollifier::PartitionFunction;
use pufem_core::sparse::SymmetricSparseMatrix;

/// Writes `dim nv nc`, the vertex coordinates and the zero-based cell indices.
pub fn write_mesh<const D: usize, W: Write>(mesh: &SimplicialMesh<D>, mut out: W) -> anyhow::Result<()> {
    writeln!(out, "{} {} {}", D, mesh.vertices().len(), mesh.num_cells())?;
    for v in mesh.vertices() {
        let line: Vec<String> = v.iter().map(|c| c.to_string()).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    for c in 0..mesh.num_cells() {
        let line: Vec<String> = mesh.cell(c).iter().map(|i| i.to_string()).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

pub fn read_mesh<const D: usize, R: BufRead>(input: R) -> anyhow::Result<SimplicialMesh<D>> {
    let mut lines = input
        .lines()
        .enumerate()
        .map(|(i, l)| l.map(|l| (i + 1, l)))
        .filter(|r| r.as_ref().map_or(true, |(_, l)| !l.trim().is_empty()));
    let mut next_line = |what: &str| -> anyhow::Result<(usize, String)> {
        lines
            .next()
            .ok_or_else(|| anyhow!("unexpected end of mesh file while reading {what}"))?
            .map_err(Into::into)
    };
    let (no, header) = next_line("the header")?;
    let head: Vec<usize> = parse_tokens(&header, no)?;
    if head.len() != 3 {
        bail!("line {no}: header must be `dim nv nc`");
    }
    let (dim, nv, nc) = (head[0], head[1], head[2]);
    if dim != D {
        bail!("line {no}: mesh dimension {dim} does not match the expected {D}");
    }
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (no, line) = next_line("vertices")?;
        let c: Vec<f64> = parse_tokens(&line, no)?;
        if c.len() != D {
            bail!("line {no}: expected {D} coordinates, found {}", c.len());
        }
        vertices.push(std::array::from_fn(|k| c[k]));
    }
    let mut cells = Vec::with_capacity(nc * (D + 1));
    for _ in 0..nc {
        let (no, line) = next_line("cells")?;
        let c: Vec<usize> = parse_tokens(&line, no)?;
        if c.len() != D + 1 {
            bail!("line {no}: expected {} vertex indices, found {}", D + 1, c.len());
        }
        cells.extend(c);
    }
    if let Some(Ok((no, _))) = lines.next() {
        bail!("line {no}: trailing content after {nc} cells");
    }
    SimplicialMesh::new(vertices, cells, 0).map_err(|e| anyhow!("invalid mesh: {e}"))
}

fn parse_tokens<T: std::str::FromStr>(line: &str, no: usize) -> anyhow::Result<Vec<T>> {
    line.split_whitespace()
        .map(|t| t.parse::<T>().map_err(|_| anyhow!("line {no}: cannot parse `{t}`")))
        .collect()
}

pub fn export_mesh<const D: usize>(mesh: &SimplicialMesh<D>, path: &Path) -> anyhow::Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = BufWriter::new(file);
    write_mesh(mesh, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn import_mesh<const D: usize>(path: &Path) -> anyhow::Result<SimplicialMesh<D>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_mesh(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))
}

/// A CSV file preceded by `# key: value` metadata lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CsvTable {
    pub metadata: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self {
            metadata: Vec::new(),
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) {
        self.metadata.push((key.to_string(), value.to_string()));
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Value of `column` in `row`.
    pub fn get(&self, row: usize, column: &str) -> Option<&str> {
        let c = self.columns.iter().position(|n| n == column)?;
        self.rows.get(row).map(|r| r[c].as_str())
    }

    /// Numeric column; unparsable cells become NaN.
    pub fn column_f64(&self, column: &str) -> Vec<f64> {
        (0..self.rows.len())
            .map(|r| self.get(r, column).and_then(|v| v.parse().ok()).unwrap_or(f64::NAN))
            .collect()
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> anyhow::Result<()> {
        for (k, v) in &self.metadata {
            writeln!(out, "# {k}: {v}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_file(&self, path: &Path) -> anyhow::Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let mut out = BufWriter::new(file);
        self.write_to(&mut out)?;
        out.flush()?;
        Ok(())
    }

    /// Parses the format written by [`CsvTable::write_to`].
    pub fn read_from<R: BufRead>(input: R) -> anyhow::Result<Self> {
        let mut metadata = Vec::new();
        let mut body = String::new();
        for line in input.lines() {
            let line = line?;
            match line.strip_prefix("# ") {
                Some(m) if body.is_empty() => {
                    let (k, v) = m.split_once(": ").unwrap_or((m, ""));
                    metadata.push((k.to_string(), v.to_string()));
                }
                _ => {
                    body.push_str(&line);
                    body.push('\n');
                }
            }
        }
        let mut r = csv::Reader::from_reader(body.as_bytes());
        let columns = r.headers()?.iter().map(str::to_string).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|rec| rec.iter().map(str::to_string).collect()))
            .collect::<Result<_, _>>()?;
        Ok(Self { metadata, columns, rows })
    }
}

/// Tabulated partition function: abscissa and value on `[-1, 1]`.
pub fn phi_table(pf: &PartitionFunction) -> CsvTable {
    let mut t = CsvTable::new(["x", "phi"]);
    let n = pf.resolution();
    for i in 0..=n {
        let x = -1.0 + 2.0 * i as f64 / n as f64;
        t.push(vec![x.to_string(), pf.value(x).to_string()]);
    }
    t
}

pub fn classification_table<const D: usize>(cls: &GridClassification<D>) -> CsvTable {
    let axes = ["i", "j", "k"];
    let mut cols = vec!["element".to_string()];
    cols.extend(axes[..D].iter().map(|a| a.to_string()));
    cols.extend(["class".to_string(), "chain".to_string()]);
    let mut t = CsvTable::new(cols);
    for lin in 0..cls.num_elements() {
        let class = cls.class(lin);
        if class == ElementClass::Outside {
            continue;
        }
        let idx = cls.element_index(lin);
        let mut row = vec![lin.to_string()];
        row.extend(idx.iter().map(|v| v.to_string()));
        row.push(
            match class {
                ElementClass::Interior => "interior",
                ElementClass::Cut => "cut",
                ElementClass::Outside => "outside",
            }
            .to_string(),
        );
        row.push(cls.chain_length(lin).map_or(String::new(), |c| c.to_string()));
        t.push(row);
    }
    t
}

pub fn particle_table<const D: usize>(particles: &ParticleField<D>) -> CsvTable {
    let mut cols: Vec<String> = (0..D).map(|k| format!("x{k}")).collect();
    cols.extend((0..particles.components).map(|k| format!("gamma{k}")));
    let mut t = CsvTable::new(cols);
    for i in 0..particles.len() {
        let mut row: Vec<String> = particles.positions[i].iter().map(|v| v.to_string()).collect();
        row.extend(particles.circulation(i).iter().map(|v| v.to_string()));
        t.push(row);
    }
    t
}

/// Upper-triangle coordinate listing `row col value`.
pub fn write_matrix_coordinates<W: Write>(matrix: &SymmetricSparseMatrix, mut out: W) -> anyhow::Result<()> {
    writeln!(out, "{} {} {}", matrix.dim(), matrix.dim(), matrix.nnz())?;
    for (r, c, v) in matrix.entries() {
        writeln!(out, "{r} {c} {v}")?;
    }
    Ok(())
}

/// Points and field values, `values` flattened component-fastest.
pub fn field_sample_table<const D: usize>(points: &[[f64; D]], values: &[f64], components: usize) -> anyhow::Result<CsvTable> {
    if values.len() != points.len() * components {
        bail!("expected {} values, found {}", points.len() * components, values.len());
    }
    let mut cols: Vec<String> = (0..D).map(|k| format!("x{k}")).collect();
    cols.extend((0..components).map(|k| format!("u{k}")));
    let mut t = CsvTable::new(cols);
    for (p, v) in points.iter().zip(values.chunks(components.max(1))) {
        let mut row: Vec<String> = p.iter().map(|c| c.to_string()).collect();
        row.extend(v.iter().map(|c| c.to_string()));
        t.push(row);
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use pufem_core::mesh::unit_cube_mesh;

    #[test]
    fn mesh_round_trip() {
        let mesh = unit_cube_mesh::<3>().unwrap().refine_uniform();
        let mut buf = Vec::new();
        write_mesh(&mesh, &mut buf).unwrap();
        let back: SimplicialMesh<3> = read_mesh(buf.as_slice()).unwrap();
        assert_eq!(back.vertices(), mesh.vertices());
        assert_eq!(back.cells(), mesh.cells());
    }

    #[test]
    fn mesh_errors() {
        let bad_index = "2 3 1\n0 0\n1 0\n0 1\n0 1 3\n";
        assert!(read_mesh::<2, _>(bad_index.as_bytes()).is_err());
        let inverted = "2 3 1\n0 0\n1 0\n0 1\n0 2 1\n";
        assert!(read_mesh::<2, _>(inverted.as_bytes()).is_err());
        let garbage = "2 3 1\n0 zero\n";
        let err = read_mesh::<2, _>(garbage.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
        let wrong_dim = "3 0 0\n";
        assert!(read_mesh::<2, _>(wrong_dim.as_bytes()).is_err());
        let ok = "2 3 1\n\n0 0\n1 0\n0 1\n0 1 2\n";
        assert_eq!(read_mesh::<2, _>(ok.as_bytes()).unwrap().num_cells(), 1);
    }

    #[test]
    fn table_round_trip() {
        let mut t = CsvTable::new(["a", "b"]);
        t.meta("experiment", "test");
        t.push(vec!["1".into(), "x, y".into()]);
        let mut buf = Vec::new();
        t.write_to(&mut buf).unwrap();
        let back = CsvTable::read_from(buf.as_slice()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.get(0, "b"), Some("x, y"));
        assert!(back.column_f64("b")[0].is_nan());
    }

    #[test]
    fn phi_table_endpoints() {
        let pf = PartitionFunction::build(64, pufem_core::mollifier::Mollifier::new().unwrap()).unwrap();
        let t = phi_table(&pf);
        assert_eq!(t.rows.len(), 65);
        let v = t.column_f64("phi");
        assert_eq!(v[0], 0.0);
        assert_eq!(v[32], 1.0);
        assert_eq!(v[64], 0.0);
    }
}
