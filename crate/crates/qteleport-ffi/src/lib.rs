#[no_mangle]
pub extern "C" fn qt_abi_version() -> u32 {
    1
}
