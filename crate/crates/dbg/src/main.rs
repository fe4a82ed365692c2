use mmcount::chain::{validate_generator, RateVector};
use mmcount::linalg::Matrix;
use mmcount::poisson_model::{PoissonModel, binomial_limit_check};
use mmcount::rapid_limits::exp_limit_check;

fn main() {
    let q = validate_generator(Matrix::from_rows(&[vec![-1.0, 2.0], vec![1.0, -2.0]]).unwrap()).unwrap();
    let lambda = RateVector::new(vec![1.0, 3.0]).unwrap();
    // exp limit deviations
    let grid = [10.0, 100.0, 1000.0, 10000.0];
    let rep = exp_limit_check(&q, &lambda, 1, 1.0, &grid).unwrap();
    println!("exp deviations: {:?}", rep.deviations);
    println!("slope {}", rep.fitted_slope);

    // binomial limit scalar
    let q1 = validate_generator(Matrix::zeros(1,1)).unwrap();
    let m = PoissonModel::new(q1, RateVector::new(vec![2.0]).unwrap(), vec![1.0], 1e-12).unwrap();
    let devs = binomial_limit_check(&m, 1.0, 0.9, &[1, 10, 50, 100, 500]).unwrap();
    println!("scalar binomial->poisson devs: {:?}", devs);
    // canonical
    let m2 = PoissonModel::new(q, lambda, vec![1.0, 0.0], 1e-12).unwrap();
    let devs2 = binomial_limit_check(&m2, 1.0, 1.1, &[1, 10, 100, 1000]).unwrap();
    println!("canonical devs: {:?}", devs2);
}
