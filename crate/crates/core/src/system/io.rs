use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use super::*;

/// A header-addressed CSV file with 1-based line numbers per record.
pub(crate) struct Table {
    pub file: String,
    columns: HashMap<String, usize>,
    pub rows: Vec<(usize, Vec<String>)>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Table> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file = path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
        Table::parse(&text, &file)
    }

    pub fn parse(text: &str, file: &str) -> Result<Table> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(text.as_bytes());
        let perr = |line: usize, message: String| Error::Parse { file: file.to_string(), line, message };
        let headers = rdr.headers().map_err(|e| perr(1, e.to_string()))?.clone();
        let columns = headers.iter().enumerate().map(|(i, h)| (h.to_ascii_lowercase(), i)).collect();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| {
                let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
                perr(line, e.to_string())
            })?;
            let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
            rows.push((line, rec.iter().map(str::to_string).collect()));
        }
        Ok(Table { file: file.to_string(), columns, rows })
    }

    pub fn has(&self, col: &str) -> bool {
        self.columns.contains_key(col)
    }

    pub fn column_names(&self) -> Vec<String> {
        let mut v: Vec<(usize, String)> = self.columns.iter().map(|(k, &i)| (i, k.clone())).collect();
        v.sort();
        v.into_iter().map(|(_, k)| k).collect()
    }

    pub fn require(&self, cols: &[&str]) -> Result<()> {
        for c in cols {
            if !self.has(c) {
                return Err(Error::Parse {
                    file: self.file.clone(),
                    line: 1,
                    message: format!("missing column `{c}`"),
                });
            }
        }
        Ok(())
    }

    pub fn err(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Parse { file: self.file.clone(), line, message: message.into() }
    }

    pub fn raw<'a>(&self, row: &'a (usize, Vec<String>), col: &str) -> &'a str {
        self.columns.get(col).and_then(|&i| row.1.get(i)).map(String::as_str).unwrap_or("")
    }

    pub fn get<T: FromStr>(&self, row: &(usize, Vec<String>), col: &str) -> Result<T> {
        let s = self.raw(row, col);
        s.parse().map_err(|_| self.err(row.0, format!("column `{col}`: cannot parse `{s}`")))
    }

    pub fn opt<T: FromStr>(&self, row: &(usize, Vec<String>), col: &str) -> Result<Option<T>> {
        if self.raw(row, col).is_empty() {
            Ok(None)
        } else {
            self.get(row, col).map(Some)
        }
    }

    pub fn flag(&self, row: &(usize, Vec<String>), col: &str) -> Result<bool> {
        match self.raw(row, col).to_ascii_lowercase().as_str() {
            "1" | "true" | "yes" | "y" => Ok(true),
            "0" | "false" | "no" | "n" | "" => Ok(false),
            s => Err(self.err(row.0, format!("column `{col}`: expected a boolean, got `{s}`"))),
        }
    }
}

fn resolve_bus(ids: &[usize], t: &Table, line: usize, id: usize) -> Result<usize> {
    ids.binary_search(&id).map_err(|_| t.err(line, format!("reference to unknown bus {id}")))
}

fn resolve_list(ids: &[usize], t: &Table, row: &(usize, Vec<String>), col: &str) -> Result<Vec<usize>> {
    let raw = t.raw(row, col);
    let mut out = Vec::new();
    for part in raw.split(';').map(str::trim).filter(|s| !s.is_empty()) {
        let id: usize = part.parse().map_err(|_| t.err(row.0, format!("column `{col}`: bad bus `{part}`")))?;
        out.push(resolve_bus(ids, t, row.0, id)?);
    }
    out.sort_unstable();
    if out.windows(2).any(|w| w[0] == w[1]) {
        return Err(t.err(row.0, format!("column `{col}`: repeated bus")));
    }
    Ok(out)
}

/// Load and validate the data set in `dir`, taking the configuration from
/// `dir/config.toml` when present and defaults otherwise.
pub fn load_system(dir: &Path) -> Result<SystemModel> {
    let cfg_path = dir.join("config.toml");
    let config = if cfg_path.exists() { StudyConfig::load(&cfg_path)? } else { StudyConfig::default() };
    load_system_with(dir, config)
}

/// Load and validate the data set in `dir` under an explicit configuration.
pub fn load_system_with(dir: &Path, config: StudyConfig) -> Result<SystemModel> {
    let buses_t = Table::read(&dir.join("buses.csv"))?;
    let lines_t = Table::read(&dir.join("lines.csv"))?;
    let units_t = Table::read(&dir.join("units.csv"))?;
    let blocks_t = Table::read(&dir.join("blocks.csv"))?;
    let wind_path = dir.join("wind.csv");
    let wind_t = if wind_path.exists() { Some(Table::read(&wind_path)?) } else { None };

    buses_t.require(&["id", "peak_load"])?;
    let mut buses = Vec::new();
    for row in &buses_t.rows {
        buses.push((row.0, Bus { id: buses_t.get(row, "id")?, peak_load: buses_t.get(row, "peak_load")? }));
    }
    buses.sort_by_key(|b| b.1.id);
    if let Some(w) = buses.windows(2).find(|w| w[0].1.id == w[1].1.id) {
        return Err(buses_t.err(w[1].0, format!("duplicate bus id {}", w[1].1.id)));
    }
    let buses: Vec<Bus> = buses.into_iter().map(|b| b.1).collect();
    let ids: Vec<usize> = buses.iter().map(|b| b.id).collect();

    lines_t.require(&["from", "to", "susceptance", "capacity"])?;
    let mut lines = Vec::new();
    for row in &lines_t.rows {
        let from = resolve_bus(&ids, &lines_t, row.0, lines_t.get(row, "from")?)?;
        let to = resolve_bus(&ids, &lines_t, row.0, lines_t.get(row, "to")?)?;
        lines.push(TransmissionLine {
            from,
            to,
            susceptance: lines_t.get(row, "susceptance")?,
            capacity: lines_t.get(row, "capacity")?,
            for_rate: lines_t.opt(row, "for")?.unwrap_or(config.line_for_default),
        });
    }

    units_t.require(&["id", "bus", "capacity", "cost", "for", "owned"])?;
    let mut units = Vec::new();
    for row in &units_t.rows {
        let bus = match units_t.opt::<usize>(row, "bus")? {
            Some(id) => Some(resolve_bus(&ids, &units_t, row.0, id)?),
            None => None,
        };
        let capacity: f64 = units_t.get(row, "capacity")?;
        let candidate_buses = resolve_list(&ids, &units_t, row, "candidate_buses")?;
        let invest_cost = match units_t.opt(row, "invest_cost")? {
            Some(c) => c,
            None if bus.is_none() => annualized_invest_cost(capacity, config.unit_invest_per_kw, config.payback_years)
                .map_err(|e| units_t.err(row.0, e.to_string()))?,
            None => 0.0,
        };
        units.push(ConventionalUnit {
            id: units_t.raw(row, "id").to_string(),
            bus,
            capacity,
            marginal_cost: units_t.get(row, "cost")?,
            for_rate: units_t.get(row, "for")?,
            owned: units_t.flag(row, "owned")?,
            candidate_buses,
            invest_cost,
        });
    }

    let mut wind_farms = Vec::new();
    if let Some(wt) = wind_t.filter(|t| !t.rows.is_empty()) {
        wt.require(&["id", "bus", "n_turbines", "owned"])?;
        let curve = read_curve(&dir.join("curve.csv"))?;
        for row in &wt.rows {
            let bus = match wt.opt::<usize>(row, "bus")? {
                Some(id) => Some(resolve_bus(&ids, &wt, row.0, id)?),
                None => None,
            };
            let n_turbines: u32 = wt.get(row, "n_turbines")?;
            let candidate_buses = resolve_list(&ids, &wt, row, "candidate_buses")?;
            let capacity = n_turbines as f64 * curve.rating();
            let invest_cost = match wt.opt(row, "invest_cost")? {
                Some(c) => c,
                None if bus.is_none() => {
                    annualized_invest_cost(capacity, config.wind_invest_per_kw, config.payback_years)
                        .map_err(|e| wt.err(row.0, e.to_string()))?
                }
                None => 0.0,
            };
            wind_farms.push(WindFarm {
                id: wt.raw(row, "id").to_string(),
                bus,
                n_turbines,
                power_curve: curve.clone(),
                owned: wt.flag(row, "owned")?,
                candidate_buses,
                invest_cost,
            });
        }
    }

    blocks_t.require(&["id", "level", "duration_h"])?;
    let mut load_blocks = Vec::new();
    for row in &blocks_t.rows {
        load_blocks.push(LoadBlock {
            id: blocks_t.raw(row, "id").to_string(),
            level: blocks_t.get(row, "level")?,
            duration: blocks_t.get(row, "duration_h")?,
        });
    }

    let model = SystemModel { buses, lines, units, wind_farms, load_blocks, config };
    model.validate()?;
    Ok(model)
}

fn read_curve(path: &Path) -> Result<PowerCurve> {
    let t = Table::read(path)?;
    t.require(&["speed_mps", "power_mw"])?;
    let mut pts = Vec::new();
    for row in &t.rows {
        pts.push((t.get(row, "speed_mps")?, t.get(row, "power_mw")?));
    }
    PowerCurve::new(pts).map_err(|e| t.err(0, e.to_string()))
}

fn join_ids(model: &SystemModel, buses: &[usize]) -> String {
    buses.iter().map(|&b| model.buses[b].id.to_string()).collect::<Vec<_>>().join(";")
}

fn opt_bus(model: &SystemModel, bus: Option<usize>) -> String {
    bus.map(|b| model.buses[b].id.to_string()).unwrap_or_default()
}

/// Write `model` in canonical form. Floats use the shortest representation
/// that parses back to the same value, so a reload is bit-identical.
pub fn save_system(model: &SystemModel, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, body: String| {
        let p = dir.join(name);
        std::fs::write(&p, body).map_err(|e| Error::io(p, e))
    };
    let mut s = String::from("id,peak_load\n");
    for b in &model.buses {
        let _ = writeln!(s, "{},{}", b.id, b.peak_load);
    }
    write("buses.csv", s)?;

    let mut s = String::from("from,to,susceptance,capacity,for\n");
    for l in &model.lines {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            model.buses[l.from].id, model.buses[l.to].id, l.susceptance, l.capacity, l.for_rate
        );
    }
    write("lines.csv", s)?;

    let mut s = String::from("id,bus,capacity,cost,for,owned,candidate_buses,invest_cost\n");
    for u in &model.units {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            u.id,
            opt_bus(model, u.bus),
            u.capacity,
            u.marginal_cost,
            u.for_rate,
            u.owned,
            join_ids(model, &u.candidate_buses),
            u.invest_cost
        );
    }
    write("units.csv", s)?;

    if let Some(first) = model.wind_farms.first() {
        let mut s = String::from("id,bus,n_turbines,owned,candidate_buses,invest_cost\n");
        for w in &model.wind_farms {
            if w.power_curve != first.power_curve {
                return Err(Error::validation(
                    "wind farms with different power curves cannot be saved to one curve.csv",
                ));
            }
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                w.id,
                opt_bus(model, w.bus),
                w.n_turbines,
                w.owned,
                join_ids(model, &w.candidate_buses),
                w.invest_cost
            );
        }
        write("wind.csv", s)?;
        let mut s = String::from("speed_mps,power_mw\n");
        for (v, p) in &first.power_curve.points {
            let _ = writeln!(s, "{v},{p}");
        }
        write("curve.csv", s)?;
    }

    let mut s = String::from("id,level,duration_h\n");
    for b in &model.load_blocks {
        let _ = writeln!(s, "{},{},{}", b.id, b.level, b.duration);
    }
    write("blocks.csv", s)?;
    write("config.toml", model.config.to_toml_string())
}
