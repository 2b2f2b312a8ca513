use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use implauth_ffi::*;

fn ok(status: ImplauthStatus) {
    if status != ImplauthStatus::Ok {
        let msg = unsafe { CStr::from_ptr(implauth_last_error()) };
        panic!("{status:?}: {}", msg.to_string_lossy());
    }
}

fn mode_a() -> ImplauthMode {
    ImplauthMode { kind: IMPLAUTH_MODE_CASE_A, max_weight: 0, features: 0, cap: 0 }
}

unsafe fn feature_set(mode: ImplauthMode, values: &[u64]) -> *mut ImplauthFeatureSet {
    let mut set = ptr::null_mut();
    ok(implauth_feature_set_from_u64(mode, values.as_ptr(), values.len(), &mut set));
    set
}

#[test]
fn full_protocol_through_the_c_abi() {
    unsafe {
        let mut rng = ptr::null_mut();
        ok(implauth_rng_new(true, 7, &mut rng));
        let profile_set = feature_set(mode_a(), &[11, 22, 33, 44]);
        let sample = feature_set(mode_a(), &[22, 44, 55]);
        let user = CString::new("dana").unwrap();

        let (mut profile, mut secret) = (ptr::null_mut(), ptr::null_mut());
        ok(implauth_setup(user.as_ptr(), profile_set, 256, IMPLAUTH_SOLVER_GAUSSIAN, 0, rng, &mut profile, &mut secret));

        // The carrier record survives a serialization round trip.
        let mut buf = ImplauthBuffer { data: ptr::null_mut(), len: 0 };
        ok(implauth_profile_serialize(profile, &mut buf));
        let mut stored = ptr::null_mut();
        ok(implauth_profile_deserialize(buf.data, buf.len, &mut stored));
        implauth_buffer_free(buf);

        let (mut challenge, mut session) = (ptr::null_mut(), ptr::null_mut());
        ok(implauth_challenge_new(stored, rng, &mut challenge, &mut session));
        let mut response = ptr::null_mut();
        ok(implauth_respond(secret, challenge, sample, ptr::null(), rng, &mut response));
        assert_eq!(implauth_response_len(response), 3);

        let mut decision = ImplauthDecision::default();
        ok(implauth_finish(session, response, &mut decision));
        assert_eq!(decision.match_count, 2);
        assert!(decision.accepted);
        assert!(!decision.infinite);
        assert_eq!((decision.numerator, decision.denominator), (1, 2));

        // Sessions are single use.
        let mut count = 0;
        assert_eq!(implauth_score(session, response, &mut count), ImplauthStatus::Session);
        assert!(!implauth_last_error().is_null());

        implauth_response_free(response);
        implauth_session_free(session);
        implauth_challenge_free(challenge);
        implauth_profile_free(stored);
        implauth_profile_free(profile);
        implauth_secret_free(secret);
        implauth_feature_set_free(sample);
        implauth_feature_set_free(profile_set);
        implauth_rng_free(rng);
    }
}

#[test]
fn weighted_and_numeric_modes() {
    unsafe {
        let mut rng = ptr::null_mut();
        ok(implauth_rng_new(true, 3, &mut rng));
        let user = CString::new("eve").unwrap();

        // Case B with the tent kernel around 5: l(4,5)=1, l(5,5)=2, l(6,5)=1.
        let mode_b = ImplauthMode { kind: IMPLAUTH_MODE_CASE_B, max_weight: 2, features: 0, cap: 0 };
        let profile_set = feature_set(mode_b, &[4, 5, 9]);
        let sample = feature_set(mode_b, &[5]);
        let mut sim = ptr::null_mut();
        ok(implauth_similarity_new(&mut sim));
        for (z, w) in [(4, 1), (5, 2), (6, 1)] {
            ok(implauth_similarity_insert_u64(sim, 5, z, w));
        }
        let (mut profile, mut secret) = (ptr::null_mut(), ptr::null_mut());
        ok(implauth_setup(user.as_ptr(), profile_set, 256, IMPLAUTH_SOLVER_CLOSED_FORM, 0, rng, &mut profile, &mut secret));
        let (mut challenge, mut session) = (ptr::null_mut(), ptr::null_mut());
        ok(implauth_challenge_new(profile, rng, &mut challenge, &mut session));
        let mut response = ptr::null_mut();
        ok(implauth_respond(secret, challenge, sample, sim, rng, &mut response));
        let mut count = 0;
        ok(implauth_score(session, response, &mut count));
        assert_eq!(count, 3);
        implauth_response_free(response);
        implauth_session_free(session);
        implauth_challenge_free(challenge);
        implauth_profile_free(profile);
        implauth_secret_free(secret);
        implauth_similarity_free(sim);
        implauth_feature_set_free(sample);
        implauth_feature_set_free(profile_set);

        // Case C: (2,0,3) against (1,1,3) is at L1 distance 2.
        let (u, v) = ([2u64, 0, 3], [1u64, 1, 3]);
        let (mut pu, mut pv) = (ptr::null_mut(), ptr::null_mut());
        ok(implauth_feature_set_from_numeric(u.as_ptr(), 3, 4, &mut pu));
        ok(implauth_feature_set_from_numeric(v.as_ptr(), 3, 4, &mut pv));
        assert_eq!(implauth_feature_set_len(pu), 5);
        let (mut profile, mut secret) = (ptr::null_mut(), ptr::null_mut());
        ok(implauth_setup(user.as_ptr(), pu, 256, IMPLAUTH_SOLVER_CLOSED_FORM, 0, rng, &mut profile, &mut secret));

        let mut buf = ImplauthBuffer { data: ptr::null_mut(), len: 0 };
        ok(implauth_secret_serialize(secret, &mut buf));
        let mut secret2 = ptr::null_mut();
        ok(implauth_secret_deserialize(buf.data, buf.len, &mut secret2));
        implauth_buffer_free(buf);

        let (mut challenge, mut session) = (ptr::null_mut(), ptr::null_mut());
        ok(implauth_challenge_new(profile, rng, &mut challenge, &mut session));
        let mut response = ptr::null_mut();
        ok(implauth_respond(secret2, challenge, pv, ptr::null(), rng, &mut response));
        let mut decision = ImplauthDecision::default();
        ok(implauth_finish(session, response, &mut decision));
        assert_eq!(decision.numerator, 2);
        assert_eq!(decision.denominator, 1);
        implauth_challenge_free(challenge);
        implauth_response_free(response);
        implauth_session_free(session);
        implauth_profile_free(profile);
        implauth_secret_free(secret);
        implauth_secret_free(secret2);
        implauth_feature_set_free(pu);
        implauth_feature_set_free(pv);
        implauth_rng_free(rng);
    }
}

#[test]
fn errors_are_reported_not_raised() {
    unsafe {
        let mut set = ptr::null_mut();
        assert_eq!(implauth_feature_set_from_u64(mode_a(), [3u64, 3].as_ptr(), 2, &mut set), ImplauthStatus::InvalidArgument);
        assert!(set.is_null());
        let msg = CStr::from_ptr(implauth_last_error()).to_string_lossy().into_owned();
        assert!(msg.contains("distinct"), "{msg}");

        let bad_mode = ImplauthMode { kind: 9, max_weight: 0, features: 0, cap: 0 };
        assert_eq!(implauth_feature_set_from_u64(bad_mode, [1u64].as_ptr(), 1, &mut set), ImplauthStatus::InvalidArgument);
        assert_eq!(implauth_feature_set_from_u64(mode_a(), ptr::null(), 2, &mut set), ImplauthStatus::NullPointer);

        let mut profile = ptr::null_mut();
        assert_eq!(implauth_profile_deserialize([1u8, 2, 3].as_ptr(), 3, &mut profile), ImplauthStatus::Decode);

        let mut d = ImplauthDecision::default();
        ok(implauth_decide(0, mode_a(), 3, 3, 2, &mut d));
        assert!(d.infinite && !d.accepted);
        assert_eq!(implauth_decide(1, mode_a(), 3, 3, 0, &mut d), ImplauthStatus::InvalidArgument);

        let tokens = [CString::new("cell-17").unwrap(), CString::new("wifi-home").unwrap(), CString::new("cell-17").unwrap()];
        let ptrs: Vec<_> = tokens.iter().map(|t| t.as_ptr()).collect();
        ok(implauth_feature_set_from_tokens(mode_a(), ptrs.as_ptr(), ptrs.len(), &mut set));
        assert_eq!(implauth_feature_set_len(set), 2);
        implauth_feature_set_free(set);

        // Freeing null is a no-op.
        implauth_profile_free(ptr::null_mut());
        implauth_buffer_free(ImplauthBuffer { data: ptr::null_mut(), len: 0 });
    }
}

#[test]
fn generated_header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/implauth.h");
    let text = std::fs::read_to_string(&header).expect("header generated by the build script");
    for name in ["implauth_setup", "implauth_respond", "implauth_score", "implauth_decide", "implauth_profile_serialize"] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use_header.c");
    std::fs::write(
        &src,
        "#include \"implauth.h\"\nint main(void) { ImplauthDecision d; ImplauthStatus s = implauth_decide(1, \
         (ImplauthMode){IMPLAUTH_MODE_CASE_A, 0, 0, 0}, 1, 1, 1, &d); return s == IMPLAUTH_STATUS_OK ? 0 : 1; }\n",
    )
    .unwrap();
    let Ok(status) = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(header.parent().unwrap())
        .arg(&src)
        .status()
    else {
        eprintln!("no C compiler available; header content checked only");
        return;
    };
    assert!(status.success(), "header does not compile as C99");
}
