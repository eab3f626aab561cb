//! Folds a `--config` file into the argument vector.
//!
//! Each `key = value` becomes `--key value` unless `--key` is already on the
//! command line. Keys the chosen subcommand does not accept are skipped, so
//! one run file can serve every stage; keys no subcommand knows are errors.

use std::collections::BTreeSet;
use std::path::Path;

use clap::CommandFactory;

use crate::args::Cli;
use crate::commands::CliError;

fn long_names(cmd: &clap::Command) -> BTreeSet<String> {
    cmd.get_arguments()
        .filter_map(|a| a.get_long())
        .map(str::to_string)
        .collect()
}

fn flag_value(argv: &[String], name: &str) -> Option<String> {
    let long = format!("--{name}");
    let eq = format!("{long}=");
    argv.iter().enumerate().find_map(|(i, a)| {
        if *a == long {
            argv.get(i + 1).cloned()
        } else {
            a.strip_prefix(&eq).map(str::to_string)
        }
    })
}

fn has_flag(argv: &[String], name: &str) -> bool {
    let long = format!("--{name}");
    argv.iter().any(|a| *a == long || a.starts_with(&format!("{long}=")))
}

pub fn merge_config(mut argv: Vec<String>) -> Result<Vec<String>, CliError> {
    let Some(path) = flag_value(&argv, "config") else {
        return Ok(argv);
    };
    let values = exhaustkit::io::read_config(Path::new(&path)).map_err(|e| CliError::Usage(e.to_string()))?;
    let root = Cli::command();
    let global = long_names(&root);
    let sub = root
        .get_subcommands()
        .find(|s| argv.iter().skip(1).any(|a| a == s.get_name()));
    let Some(sub) = sub else {
        return Ok(argv);
    };
    let accepted: BTreeSet<String> = long_names(sub).union(&global).cloned().collect();
    let known: BTreeSet<String> = root.get_subcommands().flat_map(long_names).chain(global.iter().cloned()).collect();
    for (key, value) in values {
        if !known.contains(&key) {
            return Err(CliError::Usage(format!("{path}: unknown configuration key `{key}`")));
        }
        if key == "config" || !accepted.contains(&key) || has_flag(&argv, &key) {
            continue;
        }
        let is_switch = sub
            .get_arguments()
            .chain(root.get_arguments())
            .find(|a| a.get_long() == Some(key.as_str()))
            .is_some_and(|a| !a.get_action().takes_values());
        if is_switch {
            match value.as_str() {
                "true" | "1" | "yes" => argv.push(format!("--{key}")),
                "false" | "0" | "no" => {}
                other => return Err(CliError::Usage(format!("{path}: `{key}` expects true or false, got `{other}`"))),
            }
        } else {
            argv.push(format!("--{key}"));
            argv.push(value);
        }
    }
    Ok(argv)
}
