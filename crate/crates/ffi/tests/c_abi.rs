use std::ffi::{CStr, CString};
use std::ptr;

use boundkey_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(bk_last_error_message()) }.to_string_lossy().into_owned()
}

fn take_string(s: *mut std::ffi::c_char) -> String {
    let text = unsafe { CStr::from_ptr(s) }.to_str().unwrap().to_owned();
    unsafe { bk_string_free(s) };
    text
}

#[test]
fn rho_round_trip() {
    let mut state = ptr::null_mut();
    assert_eq!(unsafe { bk_make_rho(3, &mut state) }, BkStatus::Ok);
    let mut dim = 0;
    assert_eq!(unsafe { bk_state_dim(state, &mut dim) }, BkStatus::Ok);
    assert_eq!(dim, 36);

    let mut re = vec![0.0; dim * dim];
    assert_eq!(unsafe { bk_state_copy_matrix(state, re.as_mut_ptr(), ptr::null_mut(), re.len()) }, BkStatus::Ok);
    let trace: f64 = (0..dim).map(|i| re[i * dim + i]).sum();
    assert!((trace - 1.0).abs() < 1e-12);
    // |00><00| ⊗ |X3| at the corner: first entry is (11/40)(5/33)
    assert!((re[0] - 11.0 / 40.0 * 5.0 / 33.0).abs() < 1e-15);

    let mut norm = 0.0;
    assert_eq!(unsafe { bk_state_key_block_trace_norm(state, &mut norm) }, BkStatus::Ok);
    assert!((norm - 0.275).abs() < 1e-12);

    let (mut min, mut ppt) = (0.0, false);
    assert_eq!(unsafe { bk_state_check_ppt(state, 1e-12, &mut min, &mut ppt) }, BkStatus::Ok);
    assert!(ppt && min > -1e-12);

    let mut json = ptr::null_mut();
    assert_eq!(unsafe { bk_state_ccq_report_json(state, 1e-9, &mut json) }, BkStatus::Ok);
    let report: serde_json::Value = serde_json::from_str(&take_string(json)).unwrap();
    assert!((report["p"][0][0].as_f64().unwrap() - 0.275).abs() < 1e-12);
    assert_eq!(report["secure"], false);

    unsafe { bk_state_free(state) };
}

#[test]
fn recurrence_step_matches_closed_form() {
    let (mut rho, mut next, mut expected) = (ptr::null_mut(), ptr::null_mut(), ptr::null_mut());
    let mut success = 0.0;
    unsafe {
        assert_eq!(bk_make_rho(3, &mut rho), BkStatus::Ok);
        assert_eq!(bk_recurrence_step(rho, rho, 0, &mut next, &mut success), BkStatus::Ok);
        assert_eq!(bk_rho_k_closed_form(3, 2, 0, &mut expected), BkStatus::Ok);
    }
    assert!((success - 0.505).abs() < 1e-12);
    let n = 324 * 324;
    let (mut a, mut b) = (vec![0.0; n], vec![0.0; n]);
    unsafe {
        assert_eq!(bk_state_copy_matrix(next, a.as_mut_ptr(), ptr::null_mut(), n), BkStatus::Ok);
        assert_eq!(bk_state_copy_matrix(expected, b.as_mut_ptr(), ptr::null_mut(), n), BkStatus::Ok);
    }
    let dev = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(dev < 1e-10);
    unsafe {
        bk_state_free(rho);
        bk_state_free(next);
        bk_state_free(expected);
    }
}

#[test]
fn operator_json_round_trip() {
    let mut x = ptr::null_mut();
    assert_eq!(unsafe { bk_make_x(4, &mut x) }, BkStatus::Ok);
    let mut json = ptr::null_mut();
    assert_eq!(unsafe { bk_operator_to_json(x, &mut json) }, BkStatus::Ok);
    let text = CString::new(take_string(json)).unwrap();
    let mut back = ptr::null_mut();
    assert_eq!(unsafe { bk_operator_from_json(text.as_ptr(), &mut back) }, BkStatus::Ok);
    let (mut n1, mut n2, mut dim) = (0.0, 0.0, 0);
    unsafe {
        assert_eq!(bk_operator_trace_norm(x, &mut n1), BkStatus::Ok);
        assert_eq!(bk_operator_trace_norm(back, &mut n2), BkStatus::Ok);
        assert_eq!(bk_operator_dim(back, &mut dim), BkStatus::Ok);
        bk_operator_free(x);
        bk_operator_free(back);
    }
    assert_eq!(dim, 16);
    assert!((n1 - 1.0).abs() < 1e-10 && n1 == n2);
}

#[test]
fn state_to_operator() {
    let (mut state, mut op) = (ptr::null_mut(), ptr::null_mut());
    let mut norm = 0.0;
    unsafe {
        assert_eq!(bk_make_rho(4, &mut state), BkStatus::Ok);
        assert_eq!(bk_state_to_operator(state, &mut op), BkStatus::Ok);
        assert_eq!(bk_operator_trace_norm(op, &mut norm), BkStatus::Ok);
        bk_state_free(state);
        bk_operator_free(op);
    }
    assert!((norm - 1.0).abs() < 1e-10);
}

#[test]
fn criterion_csv() {
    let mut csv = ptr::null_mut();
    assert_eq!(unsafe { bk_criterion_csv(3, 4, 0, &mut csv) }, BkStatus::Ok);
    let text = take_string(csv);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "D,k,key_block_trace_norm,gap_to_half,pbit_trace_distance,dense_checked");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("3,1,0.275,0.225,"));
}

#[test]
fn error_codes_and_messages() {
    let mut state = ptr::null_mut();
    assert_eq!(unsafe { bk_make_rho(2, &mut state) }, BkStatus::InvalidArgument);
    assert!(state.is_null());
    assert!(!last_error().is_empty());

    assert_eq!(unsafe { bk_rho_k_closed_form(3, 3, 100, &mut state) }, BkStatus::MemoryCap);
    assert!(last_error().contains("memory cap"));

    let mut dim = 0;
    assert_eq!(unsafe { bk_state_dim(ptr::null(), &mut dim) }, BkStatus::NullPointer);
    assert!(last_error().contains("state"));

    let bad = CString::new("{\"dims\": [2], \"re\": [[1]]}").unwrap();
    let mut op = ptr::null_mut();
    assert_eq!(unsafe { bk_operator_from_json(bad.as_ptr(), &mut op) }, BkStatus::Parse);

    let mut rho = ptr::null_mut();
    assert_eq!(unsafe { bk_make_rho(3, &mut rho) }, BkStatus::Ok);
    let mut buf = vec![0.0; 10];
    assert_eq!(unsafe { bk_state_copy_matrix(rho, buf.as_mut_ptr(), ptr::null_mut(), 10) }, BkStatus::InvalidArgument);
    let mut four = ptr::null_mut();
    assert_eq!(unsafe { bk_make_rho(4, &mut four) }, BkStatus::Ok);
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { bk_recurrence_step(rho, four, 0, &mut out, ptr::null_mut()) }, BkStatus::DimensionMismatch);
    unsafe {
        bk_state_free(rho);
        bk_state_free(four);
        bk_state_free(ptr::null_mut());
        bk_string_free(ptr::null_mut());
    }
}

#[test]
fn last_error_is_per_thread() {
    let mut state = ptr::null_mut();
    assert_eq!(unsafe { bk_make_rho(1, &mut state) }, BkStatus::InvalidArgument);
    let other = std::thread::spawn(last_error).join().unwrap();
    assert!(other.is_empty());
    assert!(!last_error().is_empty());
}
