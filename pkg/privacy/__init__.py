# Privacy accounting package init
