# vim: sw=4:et:ai
