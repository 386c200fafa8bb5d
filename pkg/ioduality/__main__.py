from ioduality.cli import main

raise SystemExit(main())
