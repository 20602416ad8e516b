use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::ExperimentConfig;
use super::converge::{converge_table, run_converge, write_converge_csv, ConvergeReport};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteEntry {
    pub file: PathBuf,
    pub name: Option<String>,
    pub passed: bool,
    pub passing: usize,
    pub required: usize,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteSummary {
    pub exit_code: i32,
    pub experiments: Vec<SuiteEntry>,
}

pub fn suite_table(summary: &SuiteSummary) -> String {
    let mut s = String::new();
    for e in &summary.experiments {
        let name = e.name.clone().unwrap_or_else(|| e.file.display().to_string());
        let status = if e.passed { "PASS" } else { "FAIL" };
        match &e.error {
            Some(err) => s.push_str(&format!("{status}  {name}: {err}\n")),
            None => s.push_str(&format!("{status}  {name}: {}/{} directions\n", e.passing, e.required)),
        }
    }
    s.push_str(&format!("exit code {}\n", summary.exit_code));
    s
}

fn config_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::Config(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    files.sort();
    Ok(files)
}

fn write_outputs(cfg: &ExperimentConfig, report: &ConvergeReport) -> Result<()> {
    if let Some(p) = &cfg.output.csv {
        write_converge_csv(std::fs::File::create(p)?, report)?;
    }
    if let Some(p) = &cfg.output.json {
        let text = serde_json::to_string_pretty(report).map_err(|e| Error::Io(e.to_string()))?;
        std::fs::write(p, text)?;
    }
    Ok(())
}

/// Runs every `*.toml` experiment in `dir`. Exit code 0 when all pass, 1
/// when an experiment fails its expectation, 2 when the directory or a
/// config is missing or invalid. Writes `summary.json` and `summary.txt`
/// into `out` when given.
pub fn run_suite(dir: &Path, out: Option<&Path>) -> SuiteSummary {
    let mut experiments = vec![];
    let mut code = 0;
    match config_files(dir) {
        Err(e) => {
            code = 2;
            experiments.push(SuiteEntry {
                file: dir.to_path_buf(),
                name: None,
                passed: false,
                passing: 0,
                required: 0,
                error: Some(e.to_string()),
            });
        }
        Ok(files) if files.is_empty() => {
            code = 2;
            experiments.push(SuiteEntry {
                file: dir.to_path_buf(),
                name: None,
                passed: false,
                passing: 0,
                required: 0,
                error: Some("no experiment configs found".into()),
            });
        }
        Ok(files) => {
            for f in files {
                let entry = match ExperimentConfig::load(&f) {
                    Err(e) => {
                        code = 2;
                        SuiteEntry {
                            file: f,
                            name: None,
                            passed: false,
                            passing: 0,
                            required: 0,
                            error: Some(e.to_string()),
                        }
                    }
                    Ok(cfg) => match run_converge(&cfg).and_then(|r| write_outputs(&cfg, &r).map(|_| r)) {
                        Err(e) => {
                            code = code.max(1);
                            SuiteEntry {
                                file: f,
                                name: Some(cfg.name.clone()),
                                passed: false,
                                passing: 0,
                                required: 0,
                                error: Some(e.to_string()),
                            }
                        }
                        Ok(r) => {
                            if !r.passed {
                                code = code.max(1);
                                eprint!("{}", converge_table(&r));
                            }
                            SuiteEntry {
                                file: f,
                                name: Some(r.name.clone()),
                                passed: r.passed,
                                passing: r.passing,
                                required: r.required,
                                error: None,
                            }
                        }
                    },
                };
                experiments.push(entry);
            }
        }
    }
    let summary = SuiteSummary {
        exit_code: code,
        experiments,
    };
    if let Some(dir) = out {
        let written = std::fs::create_dir_all(dir)
            .and_then(|_| {
                std::fs::write(
                    dir.join("summary.json"),
                    serde_json::to_string_pretty(&summary).unwrap_or_default(),
                )
            })
            .and_then(|_| std::fs::write(dir.join("summary.txt"), suite_table(&summary)));
        if let Err(e) = written {
            eprintln!("could not write the suite summary: {e}");
        }
    }
    summary
}
