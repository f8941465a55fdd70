use super::*;

#[test]
fn orders_from_errors() {
    let o = convergence_order(&[5.39e-4, 1.36e-4]).unwrap();
    assert!((o[0] - 1.99).abs() < 5e-3);
    assert_eq!(convergence_order(&[4.0, 1.0]).unwrap(), vec![2.0]);
    assert_eq!(convergence_order(&[1.0, 1.0]).unwrap(), vec![0.0]);
    assert!(convergence_order(&[1.0]).is_err());
    assert!(convergence_order(&[1.0, 0.0]).is_err());
}
