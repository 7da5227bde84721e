// Write a system as Matrix Market files, reload it, and reduce it through
// the command-line entry point.

use rkmor::bundled;
use rkmor::matrix_market;
use rkmor::sparse::CsrMatrix;
use rkmor::system_model::{load_system, SystemMatrix};

pub fn run_example() -> rkmor::Result<()> {
    let dir = std::env::temp_dir().join(format!("rkmor-mm-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| rkmor::Error::InvalidArgument(e.to_string()))?;
    let sys = bundled::diffusion(100);
    let SystemMatrix::Sparse(a) = sys.a() else { unreachable!("diffusion is sparse") };
    matrix_market::write_coordinate(dir.join("a.mtx"), a)?;
    matrix_market::write_real_array(dir.join("b.mtx"), &nalgebra::DMatrix::from_column_slice(100, 1, sys.b().as_slice()))?;
    matrix_market::write_real_array(dir.join("c.mtx"), &nalgebra::DMatrix::from_row_slice(1, 100, sys.c().as_slice()))?;

    let back = load_system(dir.join("a.mtx"), dir.join("b.mtx"), dir.join("c.mtx"))?;
    println!("reloaded n = {}, sparse = {}, nnz = {}", back.n(), back.a().is_sparse(), CsrMatrix::from_dense(&back.a().to_dense()).nnz());

    let out = dir.join("reduced");
    let p = |x: &std::path::Path| x.to_string_lossy().into_owned();
    let args = [
        "rkmor".to_string(),
        "reduce".into(),
        "--system-a".into(),
        p(&dir.join("a.mtx")),
        "--system-b".into(),
        p(&dir.join("b.mtx")),
        "--system-c".into(),
        p(&dir.join("c.mtx")),
        "--tableau-c".into(),
        "gauss-legendre-2".into(),
        "--tableau-o".into(),
        "gauss-legendre-2".into(),
        "--steps-c".into(),
        "0.01,0.1".into(),
        "--steps-o".into(),
        "0.02,0.2".into(),
        "--realify".into(),
        "--out".into(),
        p(&out),
    ];
    let code = rkmor::cli::run(args, &mut std::io::stdout(), &mut std::io::stderr());
    println!("exit code {code}");
    let reduced_a = matrix_market::read(out.join("reduced_a.mtx"))?;
    println!("reduced A is {}x{}, complex = {}", reduced_a.nrows, reduced_a.ncols, reduced_a.complex);
    std::fs::remove_dir_all(&dir).ok();
    if code != 0 {
        return Err(rkmor::Error::InvalidArgument(format!("reduce exited with {code}")));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> rkmor::Result<()> {
    run_example()
}
