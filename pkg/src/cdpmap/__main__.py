from cdpmap.cli import main

main()
