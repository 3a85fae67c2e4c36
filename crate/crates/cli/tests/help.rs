//! Help text is compared against files in `tests/golden/`. Set
//! `UPDATE_GOLDEN=1` to rewrite them after an intentional change.

use std::path::PathBuf;
use std::process::Command;

use cascade_edl_cli::{help_text, subcommands, Cli};
use clap::CommandFactory;

fn golden(name: &str, actual: &str) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(format!("{name}.txt"));
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing {}", path.display()));
    assert_eq!(actual, expected, "help for `{name}` changed; rerun with UPDATE_GOLDEN=1 if intended");
}

#[test]
fn top_level_help_matches_golden() {
    golden("cascade-edl", &help_text(None).unwrap());
}

#[test]
fn subcommand_help_matches_golden() {
    let names = subcommands();
    assert_eq!(names, ["gen-data", "search", "train", "eval", "infer", "quantize", "profile", "robustness"]);
    for name in names {
        golden(&name, &help_text(Some(&name)).unwrap());
    }
}

#[test]
fn every_flag_is_documented() {
    let cmd = Cli::command();
    for sub in cmd.get_subcommands() {
        let help = help_text(Some(sub.get_name())).unwrap();
        for arg in sub.get_arguments() {
            let Some(long) = arg.get_long() else { continue };
            if long == "help" {
                continue;
            }
            assert!(help.contains(&format!("--{long}")), "{} --{long} missing from help", sub.get_name());
            let doc = arg.get_help().or(arg.get_long_help()).map(|h| h.to_string()).unwrap_or_default();
            assert!(!doc.trim().is_empty(), "{} --{long} has no description", sub.get_name());
        }
    }
}

#[test]
fn binary_prints_same_help() {
    let out = Command::new(env!("CARGO_BIN_EXE_cascade-edl")).args(["eval", "--help"]).output().unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), help_text(Some("eval")).unwrap());
}
