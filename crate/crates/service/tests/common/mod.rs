#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use biaslens::demo::build_demo;
use biaslens::Store;
use tempfile::TempDir;

/// The demo project, built once per test binary.
pub fn demo_template() -> &'static Path {
    static DIR: OnceLock<PathBuf> = OnceLock::new();
    DIR.get_or_init(|| {
        let tmp = TempDir::new().unwrap().keep();
        let root = tmp.join("demo");
        build_demo(&root).expect("demo builds");
        root
    })
}

fn copy_dir(from: &Path, to: &Path) {
    fs::create_dir_all(to).unwrap();
    for entry in fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let target = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_dir(&entry.path(), &target);
        } else {
            fs::copy(entry.path(), target).unwrap();
        }
    }
}

/// A private copy of the built demo project.
pub fn demo_copy() -> (TempDir, Store) {
    let tmp = TempDir::new().unwrap();
    let root = tmp.path().join("p");
    copy_dir(demo_template(), &root);
    let store = Store::open(&root).unwrap();
    (tmp, store)
}
